//! Deterministic synthetic scenes for tests, examples and offline runs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};

const WAVES: usize = 3;

/// Smooth random fields: per band, a sum of a few low-frequency plane waves
/// rescaled to `[0, 1]`.
pub fn synth_dataset(
    seed: u64,
    count: usize,
    height: usize,
    width: usize,
    bands: usize,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::config("synthetic dataset needs at least one sample"));
    }
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::config("synthetic scenes need nonzero dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = height * width;
    let samples = (0..count)
        .map(|_| {
            let mut s = Vec::with_capacity(n * bands);
            for _ in 0..bands {
                let waves: Vec<[f64; 4]> = (0..WAVES)
                    .map(|_| {
                        let freq = rng.gen_range(0.5..3.0);
                        let angle = rng.gen_range(0.0..PI);
                        [
                            freq * angle.cos(),
                            freq * angle.sin(),
                            rng.gen_range(0.0..2.0 * PI),
                            rng.gen_range(0.3..1.0),
                        ]
                    })
                    .collect();
                let band: Vec<f64> = (0..n)
                    .map(|p| {
                        let (r, c) = (
                            (p / width) as f64 / height as f64,
                            (p % width) as f64 / width as f64,
                        );
                        waves
                            .iter()
                            .map(|[fx, fy, ph, amp]| {
                                amp * (2.0 * PI * (fx * c + fy * r) + ph).sin()
                            })
                            .sum()
                    })
                    .collect();
                let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                s.extend(band.iter().map(|v| {
                    if span > 0.0 {
                        ((v - lo) / span) as f32
                    } else {
                        0.5
                    }
                }));
            }
            s
        })
        .collect();
    Dataset::new(
        height,
        width,
        bands,
        Split::Train,
        format!("synthetic fields (seed {seed})"),
        samples,
    )
}

pub const GARMENT_SIZE: usize = 28;

/// Garment-like 28×28 grayscale silhouettes (tops, trousers, dresses, bags,
/// shoes) on a black background, as raw bytes in IDX order.
pub fn synth_garments(seed: u64, count: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count * GARMENT_SIZE * GARMENT_SIZE);
    for _ in 0..count {
        out.extend(garment(&mut rng));
    }
    out
}

fn garment(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let s = GARMENT_SIZE as f64;
    let class = rng.gen_range(0..5);
    let cx = s / 2.0 + rng.gen_range(-1.5..1.5);
    let scale = rng.gen_range(0.8..1.05);
    let tone = rng.gen_range(0.35..0.95);
    let stripe = rng.gen_range(0.0..0.3);
    let period = rng.gen_range(2.0..5.0);
    let tilt = rng.gen_range(-0.15..0.15);

    // membership test in a frame centred on the garment, unit = pixels / scale
    let inside = |x: f64, y: f64| -> bool {
        let (x, y) = ((x - cx) / scale, (y - s / 2.0) / scale);
        match class {
            // t-shirt / pullover: torso plus sleeves
            0 => {
                (x.abs() < 6.0 && (-9.0..11.0).contains(&y))
                    || (x.abs() < 12.0 - 0.6 * (y + 9.0)
                        && (-9.0..-1.0).contains(&y)
                        && x.abs() > 3.0)
            }
            // trousers: waistband and two legs
            1 => {
                (x.abs() < 6.0 && (-12.0..-7.0).contains(&y))
                    || ((x.abs() - 3.2).abs() < 2.8 && (-7.0..12.0).contains(&y))
            }
            // dress: widening trapezoid
            2 => (-11.0..12.0).contains(&y) && x.abs() < 3.5 + 0.35 * (y + 11.0),
            // bag: body plus handle ring
            3 => {
                (x.abs() < 10.0 && (-3.0..10.0).contains(&y))
                    || ((x * x + (y + 3.0).powi(2)).sqrt() - 6.0).abs() < 1.2 && y < -3.0
            }
            // shoe: sole and tapered upper
            _ => {
                ((-11.0..11.0).contains(&x) && (3.0..7.0).contains(&y))
                    || ((-11.0..3.0).contains(&x)
                        && y >= -2.0 + 0.45 * (x + 11.0).min(10.0) - 4.5
                        && y < 3.0)
            }
        }
    };

    let mut img = vec![0f64; GARMENT_SIZE * GARMENT_SIZE];
    for r in 0..GARMENT_SIZE {
        for c in 0..GARMENT_SIZE {
            // 2x2 supersampling softens the edges
            let mut cover = 0.0;
            for (dy, dx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                let (x, y) = (c as f64 + dx, r as f64 + dy);
                if inside(x + tilt * (y - s / 2.0), y) {
                    cover += 0.25;
                }
            }
            let texture = 1.0 - stripe * (0.5 + 0.5 * (2.0 * PI * r as f64 / period).sin());
            let shade = 0.85 + 0.15 * (c as f64 / s);
            img[r * GARMENT_SIZE + c] = cover * tone * texture * shade;
        }
    }
    img.iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let a = synth_dataset(9, 3, 8, 8, 2).unwrap();
        let b = synth_dataset(9, 3, 8, 8, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_dataset(10, 3, 8, 8, 2).unwrap());
    }

    #[test]
    fn normalized_bands() {
        let d = synth_dataset(1, 4, 6, 5, 8).unwrap();
        assert_eq!(d.bands, 8);
        for s in d.samples() {
            assert_eq!(s.len(), 6 * 5 * 8);
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn garments_are_nontrivial() {
        let g = synth_garments(4, 20);
        assert_eq!(g.len(), 20 * 28 * 28);
        for img in g.chunks(28 * 28) {
            let lit = img.iter().filter(|&&v| v > 0).count();
            assert!(lit > 40 && lit < 700, "lit pixels {lit}");
            assert_eq!(img[0], 0);
        }
        assert_eq!(g, synth_garments(4, 20));
    }
}
