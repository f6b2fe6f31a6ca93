//! Image preprocessing on `[H, W, J]` tensors (bands interleaved per pixel).

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn hwj(img: &Tensor<f32>) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [h, w, j] => Ok((h, w, j)),
        [h, w] => Ok((h, w, 1)),
        ref s => Err(Error::shape(format!(
            "expected an [H,W,J] image, got {s:?}"
        ))),
    }
}

/// Source coordinate of output index `i` with corner-aligned sampling.
fn corner_aligned(i: usize, out: usize, src: usize) -> f64 {
    if out == 1 {
        (src - 1) as f64 / 2.0
    } else {
        i as f64 * (src - 1) as f64 / (out - 1) as f64
    }
}

pub fn resize_bilinear(img: &Tensor<f32>, height: usize, width: usize) -> Result<Tensor<f32>> {
    let (h, w, j) = hwj(img)?;
    if height == 0 || width == 0 || h == 0 || w == 0 {
        return Err(Error::config(
            "resize needs nonzero source and target sizes",
        ));
    }
    let src = img.data();
    let mut out = vec![0f32; height * width * j];
    for r in 0..height {
        let sy = corner_aligned(r, height, h);
        let y0 = (sy.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for c in 0..width {
            let sx = corner_aligned(c, width, w);
            let x0 = (sx.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            for b in 0..j {
                let at = |y: usize, x: usize| src[(y * w + x) * j + b] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(r * width + c) * j + b] = v as f32;
            }
        }
    }
    Tensor::new([height, width, j], out)
}

/// Non-overlapping `size×size` tiles from the top-left, row-major.
/// Partial tiles along the bottom and right edges are dropped.
pub fn extract_patches(img: &Tensor<f32>, size: usize) -> Result<Vec<Tensor<f32>>> {
    let (h, w, j) = hwj(img)?;
    if size == 0 || size > h || size > w {
        return Err(Error::config(format!(
            "patch size {size} does not fit a {h}x{w} image"
        )));
    }
    let src = img.data();
    let mut patches = Vec::with_capacity((h / size) * (w / size));
    for pr in 0..h / size {
        for pc in 0..w / size {
            let mut data = Vec::with_capacity(size * size * j);
            for r in 0..size {
                let row = (pr * size + r) * w + pc * size;
                data.extend_from_slice(&src[row * j..(row + size) * j]);
            }
            patches.push(Tensor::new([size, size, j], data)?);
        }
    }
    Ok(patches)
}

/// Keeps `bands` of the source bands by nearest-index subsampling.
pub fn select_bands(img: &Tensor<f32>, bands: usize) -> Result<Tensor<f32>> {
    let (h, w, j) = hwj(img)?;
    if bands == 0 || bands > j {
        return Err(Error::config(format!(
            "cannot select {bands} bands from {j}"
        )));
    }
    let picks: Vec<usize> = (0..bands)
        .map(|i| (((i as f64 + 0.5) * j as f64 / bands as f64).floor() as usize).min(j - 1))
        .collect();
    let src = img.data();
    let mut out = Vec::with_capacity(h * w * bands);
    for p in 0..h * w {
        out.extend(picks.iter().map(|&b| src[p * j + b]));
    }
    Tensor::new([h, w, bands], out)
}

/// `[H, W, J]` to the band-major layout the imaging system consumes.
pub fn to_band_major(img: &Tensor<f32>) -> Result<Vec<f32>> {
    let (h, w, j) = hwj(img)?;
    let src = img.data();
    let mut out = vec![0f32; h * w * j];
    for p in 0..h * w {
        for b in 0..j {
            out[b * h * w + p] = src[p * j + b];
        }
    }
    Ok(out)
}

pub fn from_band_major(
    data: &[f32],
    height: usize,
    width: usize,
    bands: usize,
) -> Result<Tensor<f32>> {
    let n = height * width;
    if data.len() != n * bands {
        return Err(Error::shape(format!(
            "{} values cannot form a {height}x{width}x{bands} image",
            data.len()
        )));
    }
    let mut out = vec![0f32; n * bands];
    for b in 0..bands {
        for p in 0..n {
            out[p * bands + b] = data[b * n + p];
        }
    }
    Tensor::new([height, width, bands], out)
}
