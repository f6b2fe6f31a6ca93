//! Quality metrics, evaluation and reports.

mod evaluate;
mod metrics;
mod report;

pub use evaluate::{evaluate, EvalLabels};
pub use metrics::{mse, psnr, psnr_with_peak, ssim, ssim_band_major, PSNR_CAP_DB};
pub use report::{
    emit_report, line_chart_svg, psnr_table, psnr_vs_ratio_svg, read_metrics, stage_psnr_svg,
    write_metrics, MetricRecord, ReportFiles, Series, METRICS_FILE, METRICS_HEADER, STAGES_FILE,
};
