//! Layer primitives with exact analytic backward passes.
//!
//! Every backward here is held to central finite differences at 1e-6
//! relative error by the test suite; keep any change to the arithmetic in
//! lockstep between the forward and backward halves.

use crate::error::{Error, Result};
use crate::filters::{
    conv_plane, conv_plane_adjoint, conv_plane_tap_grad, strided_extent, PaddingMode,
};
use crate::tensor::{Scalar, Tensor};

/// 3x3 convolution with zero padding and bias; output is
/// `ceil(h/stride) x ceil(w/stride)`. `weight` is `(c_out, c_in, 3, 3)`
/// row-major, `bias` length `c_out`.
pub fn conv3x3_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    c_in: usize,
    c_out: usize,
    stride: usize,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.shape();
    if c != c_in {
        return Err(Error::dimension(format!("expected {c_in} input channels, got {c}")));
    }
    if weight.len() != c_out * c_in * 9 || bias.len() != c_out {
        return Err(Error::dimension("convolution weight/bias sizes are inconsistent"));
    }
    if stride == 0 {
        return Err(Error::argument("stride must be at least 1"));
    }
    let out_h = strided_extent(h, stride);
    let out_w = strided_extent(w, stride);
    let mut out = Tensor::zeros(n, c_out, out_h, out_w);
    let mut scratch = vec![T::zero(); out_h * out_w];
    for ni in 0..n {
        for co in 0..c_out {
            let plane = out.plane_mut(ni, co);
            plane.fill(bias[co]);
            for ci in 0..c_in {
                let taps = &weight[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
                scratch.fill(T::zero());
                conv_plane(
                    &x.data()[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w],
                    h,
                    w,
                    taps,
                    3,
                    PaddingMode::Zero,
                    stride,
                    &mut scratch,
                );
                // Borrow rules keep `plane` and `x` disjoint; accumulate.
                for (slot, &v) in plane.iter_mut().zip(&scratch) {
                    *slot = *slot + v;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv3x3_forward`] with respect to input, weight and bias.
pub fn conv3x3_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    c_in: usize,
    c_out: usize,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, c, h, w) = x.shape();
    let expected = (n, c_out, strided_extent(h, stride), strided_extent(w, stride));
    if c != c_in || grad_out.shape() != expected {
        return Err(Error::dimension("convolution backward shapes are inconsistent"));
    }
    let mut grad_x = Tensor::zeros(n, c_in, h, w);
    let mut grad_w = vec![T::zero(); c_out * c_in * 9];
    let mut grad_b = vec![T::zero(); c_out];
    for ni in 0..n {
        for co in 0..c_out {
            let g = grad_out.plane(ni, co);
            for &gv in g {
                grad_b[co] = grad_b[co] + gv;
            }
            for ci in 0..c_in {
                let taps = &weight[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
                conv_plane_adjoint(
                    g,
                    h,
                    w,
                    taps,
                    3,
                    PaddingMode::Zero,
                    stride,
                    grad_x.plane_mut(ni, ci),
                );
                conv_plane_tap_grad(
                    x.plane(ni, ci),
                    h,
                    w,
                    g,
                    3,
                    PaddingMode::Zero,
                    stride,
                    &mut grad_w[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9],
                );
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.shape();
    let data = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::from_data(n, c, h, w, data).expect("shape unchanged")
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::dimension("relu backward shapes differ"));
    }
    let (n, c, h, w) = x.shape();
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_data(n, c, h, w, data)
}

/// Global average pooling: `(n, c, h, w) -> (n, c, 1, 1)`.
pub fn gap_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.shape();
    let scale = T::from_f64(1.0 / (h * w) as f64);
    let mut out = Tensor::zeros(n, c, 1, 1);
    for ni in 0..n {
        for ci in 0..c {
            let mut acc = T::zero();
            for &v in x.plane(ni, ci) {
                acc = acc + v;
            }
            out.set(ni, ci, 0, 0, acc * scale);
        }
    }
    out
}

/// Backward of pooling: distribute `grad/(h*w)` uniformly over each plane.
pub fn gap_backward<T: Scalar>(grad_out: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (n, c, gh, gw) = grad_out.shape();
    if (gh, gw) != (1, 1) {
        return Err(Error::dimension("pooling gradient must be (n, c, 1, 1)"));
    }
    let scale = T::from_f64(1.0 / (h * w) as f64);
    let mut grad_in = Tensor::zeros(n, c, h, w);
    for ni in 0..n {
        for ci in 0..c {
            let g = grad_out.get(ni, ci, 0, 0) * scale;
            grad_in.plane_mut(ni, ci).fill(g);
        }
    }
    Ok(grad_in)
}

/// Fully connected layer on pooled features: `(n, d, 1, 1) -> (n, k, 1, 1)`.
/// `weight` is `(k, d)` row-major.
pub fn linear_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    d_out: usize,
) -> Result<Tensor<T>> {
    let (n, d, h, w) = x.shape();
    if (h, w) != (1, 1) {
        return Err(Error::dimension("linear layer expects pooled (n, d, 1, 1) input"));
    }
    if weight.len() != d_out * d || bias.len() != d_out {
        return Err(Error::dimension("linear weight/bias sizes are inconsistent"));
    }
    let mut out = Tensor::zeros(n, d_out, 1, 1);
    for ni in 0..n {
        let xs = &x.data()[ni * d..(ni + 1) * d];
        for k in 0..d_out {
            let row = &weight[k * d..(k + 1) * d];
            let mut acc = bias[k];
            for (wv, xv) in row.iter().zip(xs) {
                acc = acc + *wv * *xv;
            }
            out.set(ni, k, 0, 0, acc);
        }
    }
    Ok(out)
}

pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    d_out: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, d, _, _) = x.shape();
    if grad_out.shape() != (n, d_out, 1, 1) {
        return Err(Error::dimension("linear backward shapes are inconsistent"));
    }
    let mut grad_x = Tensor::zeros(n, d, 1, 1);
    let mut grad_w = vec![T::zero(); d_out * d];
    let mut grad_b = vec![T::zero(); d_out];
    for ni in 0..n {
        let xs = &x.data()[ni * d..(ni + 1) * d];
        for k in 0..d_out {
            let g = grad_out.get(ni, k, 0, 0);
            grad_b[k] = grad_b[k] + g;
            for j in 0..d {
                grad_w[k * d + j] = grad_w[k * d + j] + g * xs[j];
                let slot = &mut grad_x.data_mut()[ni * d + j];
                *slot = *slot + g * weight[k * d + j];
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Mean cross-entropy of softmaxed logits against integer labels.
/// Returns the scalar loss and the softmax probabilities needed by the
/// backward pass.
pub fn softmax_ce_forward<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let (n, k, h, w) = logits.shape();
    if k == 0 {
        return Err(Error::argument("softmax over an empty class set"));
    }
    if (h, w) != (1, 1) || labels.len() != n {
        return Err(Error::dimension("logits must be (n, k, 1, 1) with one label per row"));
    }
    let mut probs = Tensor::zeros(n, k, 1, 1);
    let mut total_loss = 0.0f64;
    for (ni, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::argument(format!("label {label} out of range for {k} classes")));
        }
        let row = &logits.data()[ni * k..(ni + 1) * k];
        let max = row.iter().fold(row[0], |a, &b| if b > a { b } else { a });
        let mut sum = T::zero();
        for (j, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            probs.set(ni, j, 0, 0, e);
            sum = sum + e;
        }
        for j in 0..k {
            let p = probs.get(ni, j, 0, 0) / sum;
            probs.set(ni, j, 0, 0, p);
        }
        let log_sum = sum.ln().into_f64();
        total_loss -= (row[label] - max).into_f64() - log_sum;
    }
    Ok((total_loss / n as f64, probs))
}

/// Gradient of the mean cross-entropy with respect to the logits:
/// `(softmax - onehot) / n`.
pub fn softmax_ce_backward<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let (n, k, _, _) = probs.shape();
    if labels.len() != n {
        return Err(Error::dimension("one label per batch row required"));
    }
    let scale = T::from_f64(1.0 / n as f64);
    let mut grad = probs.clone();
    for (ni, &label) in labels.iter().enumerate() {
        for j in 0..k {
            let mut g = probs.get(ni, j, 0, 0);
            if j == label {
                g = g - T::one();
            }
            grad.set(ni, j, 0, 0, g * scale);
        }
    }
    Ok(grad)
}
