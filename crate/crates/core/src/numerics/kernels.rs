//! Plain forward/adjoint kernels shared by the tape and by tape-free callers.
//!
//! Image tensors are channel-major: `[channels, height, width]`. Convolution
//! kernels are `[c_out, c_in, 3, 3]`.

use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const KSIZE: usize = 3;
const TAPS: usize = KSIZE * KSIZE;

/// Unfolds a zero-padded `[cin, h, w]` image into `[cin·9, h·w]` patch columns.
pub fn im2col<T: Real>(input: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut cols = vec![T::zero(); cin * TAPS * hw];
    for c in 0..cin {
        let plane = &input[c * hw..(c + 1) * hw];
        for ky in 0..KSIZE {
            for kx in 0..KSIZE {
                let row = &mut cols[((c * TAPS) + ky * KSIZE + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    // x + kx - 1 in [0, w)
                    let (x_lo, x_hi) = match kx {
                        0 => (1, w),
                        1 => (0, w),
                        _ => (0, w.saturating_sub(1)),
                    };
                    for x in x_lo..x_hi {
                        dst[x] = src[x + kx - 1];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds patch columns back, summing overlaps.
pub fn col2im<T: Real>(cols: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); cin * hw];
    for c in 0..cin {
        let plane = &mut out[c * hw..(c + 1) * hw];
        for ky in 0..KSIZE {
            for kx in 0..KSIZE {
                let row = &cols[((c * TAPS) + ky * KSIZE + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    let (x_lo, x_hi) = match kx {
                        0 => (1, w),
                        1 => (0, w),
                        _ => (0, w.saturating_sub(1)),
                    };
                    for x in x_lo..x_hi {
                        dst[x + kx - 1] = dst[x + kx - 1] + src[x];
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv_dims<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(usize, usize, usize, usize)> {
    let &[cin, h, w] = input.shape() else {
        return Err(Error::shape(format!(
            "conv input must be [c, h, w], got {:?}",
            input.shape()
        )));
    };
    let &[cout, kcin, kh, kw] = kernel.shape() else {
        return Err(Error::shape(format!(
            "conv kernel must be [cout, cin, 3, 3], got {:?}",
            kernel.shape()
        )));
    };
    if kh != KSIZE || kw != KSIZE {
        return Err(Error::shape(format!("kernel must be 3x3, got {kh}x{kw}")));
    }
    if kcin != cin {
        return Err(Error::shape(format!(
            "channel mismatch: input has {cin}, kernel expects {kcin}"
        )));
    }
    if bias.len() != cout {
        return Err(Error::shape(format!(
            "bias length {} != output channels {cout}",
            bias.len()
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::shape("conv input spatial dims must be >= 1"));
    }
    Ok((cin, cout, h, w))
}

/// `out[co] = bias[co] + Σ kernel[co] ⋆ input` over a zero-padded 3×3 window.
pub(crate) fn conv_forward_cols<T: Real>(
    cols: &[T],
    kernel: &[T],
    bias: &[T],
    cin: usize,
    cout: usize,
    hw: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); cout * hw];
    for (co, chunk) in out.chunks_mut(hw).enumerate() {
        chunk.iter_mut().for_each(|v| *v = bias[co]);
    }
    T::gemm(
        cout,
        cin * TAPS,
        hw,
        kernel,
        false,
        cols,
        false,
        &mut out,
        true,
    );
    out
}

/// Same-size 3×3 convolution with zero padding of one pixel.
pub fn conv2d_same<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (cin, cout, h, w) = conv_dims(input, kernel, bias)?;
    let cols = im2col(input.data(), cin, h, w);
    let out = conv_forward_cols(&cols, kernel.data(), bias.data(), cin, cout, h * w);
    Tensor::new([cout, h, w], out)
}

/// Elementwise shrinkage `sign(v)·max(|v| − |beta|, 0)`.
#[inline]
pub fn soft<T: Real>(v: T, beta: T) -> T {
    let tau = beta.abs();
    let mag = v.abs() - tau;
    if mag > T::zero() {
        mag.copysign(v)
    } else {
        T::zero()
    }
}

pub fn soft_threshold<T: Real>(v: &Tensor<T>, beta: T) -> Tensor<T> {
    v.map(|x| soft(x, beta))
}

/// Sign with `sign(0) = +1`; never produces zero.
#[inline]
pub fn binary_sign<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Applies `scale·A` (or `scale·Aᵀ`) to each contiguous band of `x`.
///
/// `mat` is `rows×cols`; without transpose each band of `x` has `cols`
/// entries and maps to `rows`, with transpose the other way round.
pub fn band_matvec<T: Real>(
    mat: &[T],
    rows: usize,
    cols: usize,
    x: &[T],
    transpose: bool,
    scale: T,
) -> Result<Vec<T>> {
    if mat.len() != rows * cols {
        return Err(Error::shape(format!(
            "matrix has {} entries, expected {rows}x{cols}",
            mat.len()
        )));
    }
    let (inner, outer) = if transpose {
        (rows, cols)
    } else {
        (cols, rows)
    };
    if inner == 0 || x.len() % inner != 0 {
        return Err(Error::shape(format!(
            "input length {} is not a multiple of the band size {inner}",
            x.len()
        )));
    }
    let bands = x.len() / inner;
    let mut out = vec![T::zero(); bands * outer];
    // Y[bands, outer] = X[bands, inner] · op(A)ᵀ
    T::gemm(
        bands, inner, outer, x, false, mat, !transpose, &mut out, false,
    );
    if scale != T::one() {
        out.iter_mut().for_each(|v| *v = *v * scale);
    }
    Ok(out)
}
