//! Metric records, CSV persistence and SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "id,role,gamma_t,gamma_s,psnr_db,ssim,seconds";
pub const METRICS_FILE: &str = "metrics.csv";
/// Per-stage PSNR and sample counts live next to the main CSV.
pub const STAGES_FILE: &str = "stages.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub id: String,
    pub role: String,
    pub gamma_t: Option<f64>,
    pub gamma_s: f64,
    /// Mean over the evaluated scenes.
    pub psnr_db: f64,
    /// `None` when scenes are smaller than the SSIM window.
    pub ssim: Option<f64>,
    pub stage_psnr: Vec<f64>,
    pub samples: usize,
    pub seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    role: String,
    gamma_t: Option<f64>,
    gamma_s: f64,
    psnr_db: f64,
    ssim: Option<f64>,
    seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageRow {
    id: String,
    samples: usize,
    stage: usize,
    psnr_db: f64,
}

/// Writes `metrics.csv`-style output to `path` and the per-stage sidecar
/// next to it.
pub fn write_metrics(records: &[MetricRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(Row {
            id: r.id.clone(),
            role: r.role.clone(),
            gamma_t: r.gamma_t,
            gamma_s: r.gamma_s,
            psnr_db: r.psnr_db,
            ssim: r.ssim,
            seconds: r.seconds,
        })?;
    }
    if records.is_empty() {
        w.write_record(METRICS_HEADER.split(','))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = stages_path(path);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&side)?;
    w.write_record(["id", "samples", "stage", "psnr_db"])?;
    for r in records {
        if r.stage_psnr.is_empty() {
            w.serialize(StageRow {
                id: r.id.clone(),
                samples: r.samples,
                stage: 0,
                psnr_db: r.psnr_db,
            })?;
        }
        for (k, &q) in r.stage_psnr.iter().enumerate() {
            w.serialize(StageRow {
                id: r.id.clone(),
                samples: r.samples,
                stage: k + 1,
                psnr_db: q,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&side, e))
}

fn stages_path(metrics: &Path) -> PathBuf {
    metrics.with_file_name(STAGES_FILE)
}

/// Reads records back; per-stage values come from the sidecar when present.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(Error::format(
            0,
            format!("unexpected metrics header '{header}'"),
        ));
    }
    let mut records: Vec<MetricRecord> = r
        .deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(MetricRecord {
                id: row.id,
                role: row.role,
                gamma_t: row.gamma_t,
                gamma_s: row.gamma_s,
                psnr_db: row.psnr_db,
                ssim: row.ssim,
                stage_psnr: Vec::new(),
                samples: 0,
                seconds: row.seconds,
            })
        })
        .collect::<Result<_>>()?;

    let side = stages_path(path);
    if side.exists() {
        let mut r = csv::Reader::from_path(&side)?;
        for row in r.deserialize::<StageRow>() {
            let row = row?;
            if let Some(rec) = records.iter_mut().find(|m| m.id == row.id) {
                rec.samples = row.samples;
                if row.stage > 0 {
                    rec.stage_psnr.push(row.psnr_db);
                }
            }
        }
    }
    Ok(records)
}

/// Text table of PSNR (dB) with one row per student ratio and one column
/// per role.
pub fn psnr_table(records: &[MetricRecord]) -> String {
    let mut roles: Vec<&str> = Vec::new();
    for m in records {
        if !roles.contains(&m.role.as_str()) {
            roles.push(&m.role);
        }
    }
    let mut rows: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for m in records {
        let col = roles.iter().position(|r| *r == m.role).unwrap();
        rows.entry(format!("{:.3}", m.gamma_s))
            .or_insert_with(|| vec![None; roles.len()])[col] = Some(m.psnr_db);
    }
    let mut out = format!("{:>8}", "gamma_s");
    for r in &roles {
        let _ = write!(out, " {r:>12}");
    }
    out.push('\n');
    for (g, vals) in rows {
        let _ = write!(out, "{g:>8}");
        for v in vals {
            match v {
                Some(v) => {
                    let _ = write!(out, " {v:>12.2}");
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Minimal SVG line chart.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let pad = ((y1 - y0) * 0.1).max(0.5);
    (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.2}</text>"#,
            px(fx),
            h - m + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{fy:.1}</text>"#,
            m - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(&ser.label),
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            w - m - 110.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// PSNR against student ratio, one series per role.
pub fn psnr_vs_ratio_svg(records: &[MetricRecord]) -> String {
    let mut by_role: Vec<Series> = Vec::new();
    for m in records {
        match by_role.iter_mut().find(|s| s.label == m.role) {
            Some(s) => s.points.push((m.gamma_s, m.psnr_db)),
            None => by_role.push(Series {
                label: m.role.clone(),
                points: vec![(m.gamma_s, m.psnr_db)],
            }),
        }
    }
    for s in &mut by_role {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    line_chart_svg(
        "Reconstruction quality vs compression",
        "gamma_s",
        "PSNR (dB)",
        &by_role,
    )
}

/// PSNR of each stage's iterate, one series per record.
pub fn stage_psnr_svg(records: &[MetricRecord]) -> String {
    let series: Vec<Series> = records
        .iter()
        .filter(|m| !m.stage_psnr.is_empty())
        .map(|m| Series {
            label: m.id.clone(),
            points: m
                .stage_psnr
                .iter()
                .enumerate()
                .map(|(k, &q)| ((k + 1) as f64, q))
                .collect(),
        })
        .collect();
    line_chart_svg("Recovery along the stages", "stage", "PSNR (dB)", &series)
}

#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub metrics: PathBuf,
    pub stages: PathBuf,
    pub table: PathBuf,
    pub psnr_chart: PathBuf,
    pub stage_chart: PathBuf,
}

pub fn emit_report(records: &[MetricRecord], out_dir: impl AsRef<Path>) -> Result<ReportFiles> {
    if records.is_empty() {
        return Err(Error::Usage(
            "report needs at least one metric record".into(),
        ));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        metrics: dir.join(METRICS_FILE),
        stages: dir.join(STAGES_FILE),
        table: dir.join("psnr_table.txt"),
        psnr_chart: dir.join("psnr_vs_gamma.svg"),
        stage_chart: dir.join("stage_psnr.svg"),
    };
    write_metrics(records, &files.metrics)?;
    let write = |p: &Path, text: String| std::fs::write(p, text).map_err(|e| Error::io(p, e));
    write(&files.table, psnr_table(records))?;
    write(&files.psnr_chart, psnr_vs_ratio_svg(records))?;
    write(&files.stage_chart, stage_psnr_svg(records))?;
    Ok(files)
}
