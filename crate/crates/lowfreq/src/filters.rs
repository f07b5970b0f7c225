//! Digital spatial Gaussian low-pass filter, its high-pass complement, and
//! general same-size 2D convolution with configurable padding and stride.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::tensor::Scalar;

/// Tap normalization for the truncated Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Closed-form values `G(x,y) = exp(-(x^2+y^2)/(2*s^2)) / (2*pi*s^2)`
    /// with `s = floor(m/2)`, kept as evaluated. The truncated taps sum to
    /// about 0.779 for `m = 3`, so each application scales the signal mean
    /// by that factor.
    Raw,
    /// Taps rescaled to sum to one, giving unit DC gain.
    UnitSum,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "unit_sum" => Ok(Normalization::UnitSum),
            other => Err(Error::argument(format!(
                "unknown normalization '{other}' (expected raw|unit_sum)"
            ))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::UnitSum => "unit_sum",
        })
    }
}

/// Boundary handling for same-size convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaddingMode {
    /// Out-of-range samples read zero.
    Zero,
    /// Mirror across the edge pixel without repeating it
    /// (index -1 reads row 1).
    Reflect,
    /// Periodic wrap-around; the only mode with an exact spectral
    /// counterpart.
    Circular,
}

impl FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PaddingMode::Zero),
            "reflect" => Ok(PaddingMode::Reflect),
            "circular" => Ok(PaddingMode::Circular),
            other => Err(Error::argument(format!(
                "unknown padding '{other}' (expected zero|reflect|circular)"
            ))),
        }
    }
}

impl fmt::Display for PaddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaddingMode::Zero => "zero",
            PaddingMode::Reflect => "reflect",
            PaddingMode::Circular => "circular",
        })
    }
}

/// Odd-sized square filter with symmetric taps.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    m: usize,
    taps: Vec<f64>,
    normalization: Normalization,
    sigma: f64,
}

impl Kernel {
    /// Build a kernel from explicit taps. The taps must be symmetric under
    /// horizontal flip, vertical flip and transposition — the symmetry that
    /// makes correlation and convolution interchangeable everywhere in this
    /// crate.
    pub fn from_taps(m: usize, taps: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::argument(format!("kernel width must be odd and >= 3, got {m}")));
        }
        if taps.len() != m * m {
            return Err(Error::dimension(format!(
                "expected {} taps for m={m}, got {}",
                m * m,
                taps.len()
            )));
        }
        for y in 0..m {
            for x in 0..m {
                let v = taps[y * m + x];
                let flips = [
                    taps[y * m + (m - 1 - x)],
                    taps[(m - 1 - y) * m + x],
                    taps[x * m + y],
                ];
                if flips.iter().any(|&f| f != v) {
                    return Err(Error::argument("kernel taps must be symmetric"));
                }
            }
        }
        Ok(Kernel { m, taps, normalization, sigma: (m / 2) as f64 })
    }

    /// Single unit tap at the center; convolving with it is the identity.
    pub fn identity(m: usize) -> Result<Self> {
        let mut taps = vec![0.0; m * m];
        if m > 0 {
            taps[(m / 2) * m + m / 2] = 1.0;
        }
        Kernel::from_taps(m, taps, Normalization::Raw)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, ky: usize, kx: usize) -> f64 {
        self.taps[ky * self.m + kx]
    }

    pub fn tap_sum(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// Truncated discrete Gaussian of width `m` (odd, >= 3) with standard
/// deviation `floor(m/2)`:
/// `G(x,y) = exp(-(x^2+y^2)/(2*s^2)) / (2*pi*s^2)` for offsets
/// `-floor(m/2) <= x, y <= floor(m/2)`.
pub fn gaussian_kernel(m: usize, normalization: Normalization) -> Result<Kernel> {
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::argument(format!("kernel width must be odd and >= 3, got {m}")));
    }
    let r = (m / 2) as isize;
    let sigma = r as f64;
    let scale = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let mut taps = Vec::with_capacity(m * m);
    for y in -r..=r {
        for x in -r..=r {
            let d2 = (x * x + y * y) as f64;
            taps.push(scale * (-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    if normalization == Normalization::UnitSum {
        let sum: f64 = taps.iter().sum();
        for tap in &mut taps {
            *tap /= sum;
        }
    }
    Ok(Kernel { m, taps, normalization, sigma })
}

/// Map a possibly out-of-range index into `[0, len)` per the padding mode.
/// `None` means the sample reads zero.
#[inline]
pub(crate) fn pad_index(i: isize, len: usize, mode: PaddingMode) -> Option<usize> {
    let n = len as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match mode {
        PaddingMode::Zero => None,
        PaddingMode::Reflect => {
            let mut j = i;
            // Single mirror suffices for the kernel radii the callers allow.
            if j < 0 {
                j = -j;
            }
            if j >= n {
                j = 2 * (n - 1) - j;
            }
            debug_assert!((0..n).contains(&j));
            Some(j as usize)
        }
        PaddingMode::Circular => Some(i.rem_euclid(n) as usize),
    }
}

pub(crate) fn strided_extent(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Correlate one plane with a square kernel. Output location `(i, j)` is
/// computed at input location `(i*stride, j*stride)`; output size is
/// `ceil(h/stride) x ceil(w/stride)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_plane<T: Scalar>(
    input: &[T],
    h: usize,
    w: usize,
    taps: &[T],
    m: usize,
    padding: PaddingMode,
    stride: usize,
    output: &mut [T],
) {
    let r = (m / 2) as isize;
    let out_h = strided_extent(h, stride);
    let out_w = strided_extent(w, stride);
    debug_assert_eq!(input.len(), h * w);
    debug_assert_eq!(output.len(), out_h * out_w);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = T::zero();
            for ky in 0..m {
                let iy = (oy * stride) as isize + ky as isize - r;
                let Some(py) = pad_index(iy, h, padding) else { continue };
                let row = &input[py * w..(py + 1) * w];
                for kx in 0..m {
                    let ix = (ox * stride) as isize + kx as isize - r;
                    if let Some(px) = pad_index(ix, w, padding) {
                        acc = acc + taps[ky * m + kx] * row[px];
                    }
                }
            }
            output[oy * out_w + ox] = acc;
        }
    }
}

/// Adjoint of [`conv_plane`]: scatter `grad_out` back through the same index
/// map. `<conv(x), y> == <x, adjoint(y)>` up to rounding, for every padding
/// mode and stride.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_plane_adjoint<T: Scalar>(
    grad_out: &[T],
    h: usize,
    w: usize,
    taps: &[T],
    m: usize,
    padding: PaddingMode,
    stride: usize,
    grad_in: &mut [T],
) {
    let r = (m / 2) as isize;
    let out_h = strided_extent(h, stride);
    let out_w = strided_extent(w, stride);
    debug_assert_eq!(grad_out.len(), out_h * out_w);
    debug_assert_eq!(grad_in.len(), h * w);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let g = grad_out[oy * out_w + ox];
            for ky in 0..m {
                let iy = (oy * stride) as isize + ky as isize - r;
                let Some(py) = pad_index(iy, h, padding) else { continue };
                for kx in 0..m {
                    let ix = (ox * stride) as isize + kx as isize - r;
                    if let Some(px) = pad_index(ix, w, padding) {
                        let slot = &mut grad_in[py * w + px];
                        *slot = *slot + taps[ky * m + kx] * g;
                    }
                }
            }
        }
    }
}

/// Gradient of a correlation with respect to its taps:
/// `d/d taps[ky,kx] = sum_(oy,ox) grad_out(oy,ox) * input(sampled)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_plane_tap_grad<T: Scalar>(
    input: &[T],
    h: usize,
    w: usize,
    grad_out: &[T],
    m: usize,
    padding: PaddingMode,
    stride: usize,
    tap_grads: &mut [T],
) {
    let r = (m / 2) as isize;
    let out_h = strided_extent(h, stride);
    let out_w = strided_extent(w, stride);
    debug_assert_eq!(tap_grads.len(), m * m);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let g = grad_out[oy * out_w + ox];
            for ky in 0..m {
                let iy = (oy * stride) as isize + ky as isize - r;
                let Some(py) = pad_index(iy, h, padding) else { continue };
                for kx in 0..m {
                    let ix = (ox * stride) as isize + kx as isize - r;
                    if let Some(px) = pad_index(ix, w, padding) {
                        let slot = &mut tap_grads[ky * m + kx];
                        *slot = *slot + g * input[py * w + px];
                    }
                }
            }
        }
    }
}

fn check_conv_args(image: &Image, m: usize, padding: PaddingMode, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::argument("stride must be at least 1"));
    }
    // Zero padding tolerates kernels larger than the image (missing samples
    // read zeros); reflect and circular index arithmetic does not.
    if padding != PaddingMode::Zero && (m > image.height() || m > image.width()) {
        return Err(Error::dimension(format!(
            "kernel width {m} exceeds image size {}x{} under {padding} padding",
            image.height(),
            image.width()
        )));
    }
    Ok(())
}

/// Same-size correlation of `image` with `kernel` (identical to convolution
/// because kernel taps are symmetric), sampled every `stride` pixels.
pub fn convolve2d(
    image: &Image,
    kernel: &Kernel,
    padding: PaddingMode,
    stride: usize,
) -> Result<Image> {
    check_conv_args(image, kernel.m(), padding, stride)?;
    let out_h = strided_extent(image.height(), stride);
    let out_w = strided_extent(image.width(), stride);
    let mut out = vec![0.0f64; out_h * out_w];
    conv_plane(
        image.data(),
        image.height(),
        image.width(),
        kernel.taps(),
        kernel.m(),
        padding,
        stride,
        &mut out,
    );
    Image::new(out_h, out_w, out)
}

/// Gaussian low-pass with a width-`m` unit-sum kernel, stride 1.
pub fn lowpass(image: &Image, m: usize, padding: PaddingMode) -> Result<Image> {
    let kernel = gaussian_kernel(m, Normalization::UnitSum)?;
    convolve2d(image, &kernel, padding, 1)
}

/// High-pass complement: `image - lowpass(image, m, padding)`.
pub fn highpass(image: &Image, m: usize, padding: PaddingMode) -> Result<Image> {
    image.sub(&lowpass(image, m, padding)?)
}
