//! The low-frequency module: a fixed depthwise Gaussian blur applied to
//! feature tensors, with an exact backward pass, plus the two ways of wiring
//! it into a network — inserting it before global average pooling (IE) and
//! replacing strided convolutions with a 1x1 convolution followed by a
//! strided blur (RSL).

use crate::error::{Error, Result};
use crate::filters::{
    conv_plane, conv_plane_adjoint, gaussian_kernel, strided_extent, Kernel, Normalization,
    PaddingMode,
};
use crate::nn::{ModelSpec, Stage, Variant};
use crate::tensor::{Scalar, Tensor};

/// Configuration of the fixed blur: kernel width, boundary handling,
/// sampling stride (1 when inserted before pooling, 2 when replacing a
/// strided convolution) and tap normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfmConfig {
    pub m: usize,
    pub padding: PaddingMode,
    pub stride: usize,
    pub normalization: Normalization,
}

impl Default for LfmConfig {
    fn default() -> Self {
        LfmConfig {
            m: 3,
            padding: PaddingMode::Reflect,
            stride: 1,
            normalization: Normalization::UnitSum,
        }
    }
}

impl LfmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 3 || self.m.is_multiple_of(2) {
            return Err(Error::argument(format!(
                "blur width must be odd and >= 3, got {}",
                self.m
            )));
        }
        if !(self.stride == 1 || self.stride == 2) {
            return Err(Error::argument(format!("stride must be 1 or 2, got {}", self.stride)));
        }
        Ok(())
    }

    pub fn with_stride(self, stride: usize) -> Self {
        LfmConfig { stride, ..self }
    }

    /// The fixed kernel this configuration denotes. Recomputed on demand and
    /// never stored in a model's parameter set, so no optimizer can touch it.
    pub fn kernel(&self) -> Result<Kernel> {
        self.validate()?;
        gaussian_kernel(self.m, self.normalization)
    }

    fn taps<T: Scalar>(&self) -> Result<Vec<T>> {
        Ok(self.kernel()?.taps().iter().map(|&t| T::from_f64(t)).collect())
    }

    fn check_plane(&self, h: usize, w: usize) -> Result<()> {
        if self.padding != PaddingMode::Zero && (self.m > h || self.m > w) {
            return Err(Error::dimension(format!(
                "blur width {} exceeds plane size {h}x{w} under {} padding",
                self.m, self.padding
            )));
        }
        Ok(())
    }
}

/// Blur every (batch, channel) plane with the fixed Gaussian kernel.
/// Channel count is unchanged; spatial dims shrink by the stride.
pub fn lfm_forward<T: Scalar>(x: &Tensor<T>, cfg: &LfmConfig) -> Result<Tensor<T>> {
    cfg.validate()?;
    let (n, c, h, w) = x.shape();
    cfg.check_plane(h, w)?;
    let taps: Vec<T> = cfg.taps()?;
    let out_h = strided_extent(h, cfg.stride);
    let out_w = strided_extent(w, cfg.stride);
    let mut out = Tensor::zeros(n, c, out_h, out_w);
    for ni in 0..n {
        for ci in 0..c {
            let input = x.plane(ni, ci);
            let mut plane = vec![T::zero(); out_h * out_w];
            conv_plane(input, h, w, &taps, cfg.m, cfg.padding, cfg.stride, &mut plane);
            out.plane_mut(ni, ci).copy_from_slice(&plane);
        }
    }
    Ok(out)
}

/// Gradient of [`lfm_forward`] with respect to its input: the adjoint of the
/// strided, padded correlation, which for stride 1 is correlation with the
/// flipped (= same, by symmetry) kernel and for stride 2 the
/// scatter-then-convolve transpose.
pub fn lfm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cfg: &LfmConfig,
    input_shape: (usize, usize, usize, usize),
) -> Result<Tensor<T>> {
    cfg.validate()?;
    let (n, c, h, w) = input_shape;
    cfg.check_plane(h, w)?;
    let expected = (n, c, strided_extent(h, cfg.stride), strided_extent(w, cfg.stride));
    if grad_out.shape() != expected {
        return Err(Error::dimension(format!(
            "gradient shape {:?} does not match forward output {:?}",
            grad_out.shape(),
            expected
        )));
    }
    let taps: Vec<T> = cfg.taps()?;
    let mut grad_in = Tensor::zeros(n, c, h, w);
    for ni in 0..n {
        for ci in 0..c {
            let g = grad_out.plane(ni, ci);
            let mut plane = vec![T::zero(); h * w];
            conv_plane_adjoint(g, h, w, &taps, cfg.m, cfg.padding, cfg.stride, &mut plane);
            grad_in.plane_mut(ni, ci).copy_from_slice(&plane);
        }
    }
    Ok(grad_in)
}

/// Pointwise (1x1) convolution mixing `c_in` channels into `c_out`.
/// `weight` is `c_out * c_in` row-major, `bias` length `c_out`.
pub(crate) fn conv1x1_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    c_out: usize,
) -> Result<Tensor<T>> {
    let (n, c_in, h, w) = x.shape();
    if weight.len() != c_out * c_in || bias.len() != c_out {
        return Err(Error::dimension(format!(
            "1x1 weights for {c_in}->{c_out} channels need {} + {} values, got {} + {}",
            c_out * c_in,
            c_out,
            weight.len(),
            bias.len()
        )));
    }
    let mut out = Tensor::zeros(n, c_out, h, w);
    for ni in 0..n {
        for co in 0..c_out {
            let mut acc = vec![bias[co]; h * w];
            for ci in 0..c_in {
                let wv = weight[co * c_in + ci];
                for (slot, &v) in acc.iter_mut().zip(x.plane(ni, ci)) {
                    *slot = *slot + wv * v;
                }
            }
            out.plane_mut(ni, co).copy_from_slice(&acc);
        }
    }
    Ok(out)
}

pub(crate) fn conv1x1_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    c_out: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, c_in, h, w) = x.shape();
    debug_assert_eq!(grad_out.shape(), (n, c_out, h, w));
    let mut grad_x = Tensor::zeros(n, c_in, h, w);
    let mut grad_w = vec![T::zero(); c_out * c_in];
    let mut grad_b = vec![T::zero(); c_out];
    for ni in 0..n {
        for co in 0..c_out {
            let g = grad_out.plane(ni, co);
            for &gv in g {
                grad_b[co] = grad_b[co] + gv;
            }
            for ci in 0..c_in {
                let xp = x.plane(ni, ci);
                let mut wsum = T::zero();
                for (&gv, &xv) in g.iter().zip(xp) {
                    wsum = wsum + gv * xv;
                }
                grad_w[co * c_in + ci] = grad_w[co * c_in + ci] + wsum;
                let wv = weight[co * c_in + ci];
                let gx = grad_x.plane_mut(ni, ci);
                for (slot, &gv) in gx.iter_mut().zip(g) {
                    *slot = *slot + wv * gv;
                }
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// The block that replaces a 3x3 stride-2 convolution: a learnable 1x1
/// convolution followed by the fixed blur sampled at stride 2, so the
/// sampling step sees a band-limited signal.
pub fn rsl_block_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    c_out: usize,
    cfg: &LfmConfig,
) -> Result<Tensor<T>> {
    if cfg.stride != 2 {
        return Err(Error::argument(format!(
            "the strided-replacement block requires stride 2, got {}",
            cfg.stride
        )));
    }
    let mixed = conv1x1_forward(x, weight, bias, c_out)?;
    lfm_forward(&mixed, cfg)
}

/// Gradients of [`rsl_block_forward`] with respect to input, weight and
/// bias.
pub fn rsl_block_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    c_out: usize,
    cfg: &LfmConfig,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let mixed = conv1x1_forward(x, weight, bias, c_out)?;
    let grad_mixed = lfm_backward(grad_out, cfg, mixed.shape())?;
    conv1x1_backward(x, weight, c_out, &grad_mixed)
}

/// Insert the fixed blur immediately before global average pooling, turning
/// a baseline description into its IE variant. Adds no parameters; applied
/// to a description that already carries the blur it returns it unchanged.
pub fn ie_attach(spec: &ModelSpec) -> Result<ModelSpec> {
    let stages = &spec.stages;
    let len = stages.len();
    if len < 2
        || !matches!(stages[len - 1], Stage::Linear { .. })
        || !matches!(stages[len - 2], Stage::GlobalAvgPool)
    {
        return Err(Error::structure(
            "network must end with global average pooling followed by a linear classifier",
        ));
    }
    let mut out = spec.clone();
    out.variant = Variant::Ie;
    out.lfm_config = out.lfm_config.with_stride(1);
    if len >= 3 && matches!(stages[len - 3], Stage::Lfm) {
        return Ok(out);
    }
    out.stages.insert(len - 2, Stage::Lfm);
    Ok(out)
}
