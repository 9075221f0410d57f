//! Per-sample 2D convolution primitives built on im2col + gemm.
//!
//! All functions operate on a single sample laid out channel-major
//! (C, H, W). The graph layer loops over the batch dimension.

use super::tensor::Scalar;

pub fn conv_out_dim(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    (input + 2 * pad).checked_sub(k).map(|v| v / stride + 1)
}

pub fn convt_out_dim(input: usize, k: usize, stride: usize, pad: usize, out_pad: usize) -> usize {
    (input - 1) * stride + k + out_pad - 2 * pad
}

/// Gather patches: x (ic, h, w) -> col (ic*k*k, oh*ow).
#[allow(clippy::too_many_arguments)]
fn im2col<F: Scalar>(
    x: &[F],
    ic: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [F],
) {
    debug_assert_eq!(x.len(), ic * h * w);
    debug_assert_eq!(col.len(), ic * k * k * oh * ow);
    for c in 0..ic {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    let dst = row + oy * ow;
                    if iy < 0 || iy >= h as isize {
                        col[dst..dst + ow].fill(F::zero());
                        continue;
                    }
                    let src = (c * h + iy as usize) * w;
                    for ox in 0..ow {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        col[dst + ox] = if ix < 0 || ix >= w as isize {
                            F::zero()
                        } else {
                            x[src + ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add patches back: col (ic*k*k, oh*ow) -> x (ic, h, w).
#[allow(clippy::too_many_arguments)]
fn col2im<F: Scalar>(
    col: &[F],
    ic: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [F],
) {
    debug_assert_eq!(x.len(), ic * h * w);
    x.fill(F::zero());
    for c in 0..ic {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = (c * h + iy as usize) * w;
                    let src = row + oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            x[dst + ix as usize] = x[dst + ix as usize] + col[src + ox];
                        }
                    }
                }
            }
        }
    }
}

/// y (oc, oh, ow) = w (oc, ic*k*k) * im2col(x) + b.
#[allow(clippy::too_many_arguments)]
pub fn conv_fwd<F: Scalar>(
    x: &[F],
    weight: &[F],
    bias: &[F],
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    y: &mut [F],
) {
    let mut col = vec![F::zero(); ic * k * k * oh * ow];
    im2col(x, ic, h, w, k, stride, pad, oh, ow, &mut col);
    F::gemm(oc, ic * k * k, oh * ow, F::one(), weight, false, &col, false, F::zero(), y);
    for c in 0..oc {
        let b = bias[c];
        for v in &mut y[c * oh * ow..(c + 1) * oh * ow] {
            *v = *v + b;
        }
    }
}

/// dx (ic, h, w) = col2im(w^T * gy); the data gradient of conv_fwd and also
/// the forward map of the transposed convolution.
#[allow(clippy::too_many_arguments)]
pub fn conv_bwd_data<F: Scalar>(
    gy: &[F],
    weight: &[F],
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    dx: &mut [F],
) {
    let mut col = vec![F::zero(); ic * k * k * oh * ow];
    F::gemm(ic * k * k, oc, oh * ow, F::one(), weight, true, gy, false, F::zero(), &mut col);
    col2im(&col, ic, h, w, k, stride, pad, oh, ow, dx);
}

/// dw (oc, ic*k*k) += gy * im2col(x)^T.
#[allow(clippy::too_many_arguments)]
pub fn conv_bwd_weight<F: Scalar>(
    x: &[F],
    gy: &[F],
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    dw: &mut [F],
) {
    let mut col = vec![F::zero(); ic * k * k * oh * ow];
    im2col(x, ic, h, w, k, stride, pad, oh, ow, &mut col);
    F::gemm(oc, oh * ow, ic * k * k, F::one(), gy, false, &col, true, F::one(), dw);
}
