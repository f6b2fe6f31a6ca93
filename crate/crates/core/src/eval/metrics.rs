//! Image quality metrics on data normalized to `[0, 1]`.

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub const PSNR_CAP_DB: f64 = 100.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

pub fn mse<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "cannot compare {} values with {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::shape("cannot compare empty images"));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    Ok(sum / a.len() as f64)
}

pub fn psnr_with_peak<T: Real>(a: &[T], b: &[T], peak: f64) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / e).log10()).min(PSNR_CAP_DB))
}

/// PSNR in dB with peak 1, capped at 100 dB for identical inputs.
pub fn psnr<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    psnr_with_peak(a, b, 1.0)
}

fn gaussian_taps() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable Gaussian filter over valid window positions.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - WINDOW + 1, w - WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..WINDOW).map(|k| g[k] * img[r * w + c + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|k| g[k] * rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let g = gaussian_taps();
    let (c1, c2) = (K1 * K1, K2 * K2);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(a, h, w, &g);
    let mu_b = filter_valid(b, h, w, &g);
    let aa = filter_valid(&prod(a, a), h, w, &g);
    let bb = filter_valid(&prod(b, b), h, w, &g);
    let ab = filter_valid(&prod(a, b), h, w, &g);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum::<f64>()
        / n as f64
}

/// SSIM of band-major scenes (`bands` planes of `height×width`), averaged
/// over bands.
pub fn ssim_band_major<T: Real>(
    a: &[T],
    b: &[T],
    height: usize,
    width: usize,
    bands: usize,
) -> Result<f64> {
    let n = height * width;
    if a.len() != n * bands || b.len() != n * bands {
        return Err(Error::shape(format!(
            "ssim expects {} values per image, got {} and {}",
            n * bands,
            a.len(),
            b.len()
        )));
    }
    if height < WINDOW || width < WINDOW {
        return Err(Error::config(format!(
            "ssim needs images of at least {WINDOW}x{WINDOW}, got {height}x{width}"
        )));
    }
    if bands == 0 {
        return Err(Error::shape("ssim needs at least one band"));
    }
    let to64 = |s: &[T]| s.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
    let total: f64 = (0..bands)
        .map(|j| {
            ssim_plane(
                &to64(&a[j * n..(j + 1) * n]),
                &to64(&b[j * n..(j + 1) * n]),
                height,
                width,
            )
        })
        .sum();
    Ok(total / bands as f64)
}

/// SSIM of `[H, W]` or `[H, W, J]` images.
pub fn ssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "ssim shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (h, w, j) = match *a.shape() {
        [h, w] => (h, w, 1),
        [h, w, j] => (h, w, j),
        ref s => {
            return Err(Error::shape(format!(
                "ssim expects [H,W] or [H,W,J], got {s:?}"
            )))
        }
    };
    let planar = |t: &Tensor<T>| {
        let mut out = vec![T::zero(); h * w * j];
        for p in 0..h * w {
            for band in 0..j {
                out[band * h * w + p] = t.data()[p * j + band];
            }
        }
        out
    };
    ssim_band_major(&planar(a), &planar(b), h, w, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_values() {
        let a = vec![0.0f64; 4];
        assert!((psnr(&a, &[0.1f64; 4]).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &[1.0f64; 4]).unwrap().abs() < 1e-12);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        assert!(matches!(psnr(&a, &[0.0; 3]), Err(Error::Shape(_))));
    }

    /// Weighted statistics at every window position, straight from the definition.
    fn ssim_direct(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
        let g = gaussian_taps();
        let (c1, c2) = (K1 * K1, K2 * K2);
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..=h - WINDOW {
            for c in 0..=w - WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..WINDOW {
                    for k in 0..WINDOW {
                        let wt = g[i] * g[k];
                        let (x, y) = (a[(r + i) * w + c + k], b[(r + i) * w + c + k]);
                        ma += wt * x;
                        mb += wt * y;
                        saa += wt * x * x;
                        sbb += wt * y * y;
                        sab += wt * x * y;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn matches_direct_windowed_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..32 * 32).map(|_| rng.gen()).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|v| (v + rng.gen_range(-0.2..0.2f64)).clamp(0.0, 1.0))
            .collect();
        let fast = ssim_band_major(&a, &b, 32, 32, 1).unwrap();
        assert!((fast - ssim_direct(&a, &b, 32, 32)).abs() < 1e-6);
        let c: Vec<f64> = (0..32 * 32).map(|_| rng.gen()).collect();
        let fast = ssim_band_major(&a, &c, 32, 32, 1).unwrap();
        assert!((fast - ssim_direct(&a, &c, 32, 32)).abs() < 1e-6);
    }

    #[test]
    fn identity_and_inversion() {
        let a: Vec<f64> = (0..16 * 16).map(|i| ((i * 7) % 16) as f64 / 15.0).collect();
        assert!((ssim_band_major(&a, &a, 16, 16, 1).unwrap() - 1.0).abs() < 1e-12);
        let inv: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
        assert!(ssim_band_major(&a, &inv, 16, 16, 1).unwrap() < 1.0);
    }

    #[test]
    fn small_images_are_config_errors() {
        let a = vec![0.5f64; 10 * 10];
        assert!(matches!(
            ssim_band_major(&a, &a, 10, 10, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hwj_layout_averages_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Tensor::new([12, 12, 2], (0..288).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let mut bd = a.data().to_vec();
        for p in 0..144 {
            bd[p * 2 + 1] = 1.0 - bd[p * 2 + 1];
        }
        let b = Tensor::new([12, 12, 2], bd).unwrap();
        let s = ssim(&a, &b).unwrap();
        assert!(s < 0.75 && s > -0.5, "{s}");
    }
}
