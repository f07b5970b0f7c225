//! Dense NCHW tensor generic over the scalar type.
//!
//! Training runs in `f64` by default; `f32` is available for speed. Both
//! share the same code paths so results stay deterministic per type.

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::image::Image;

/// Element type tag used by the tensor file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemType {
    F32,
    F64,
}

impl ElemType {
    pub fn byte_width(self) -> usize {
        match self {
            ElemType::F32 => 4,
            ElemType::F64 => 8,
        }
    }
}

/// Floating-point scalar usable as a tensor element.
pub trait Scalar:
    Float + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    const ELEM: ElemType;

    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const ELEM: ElemType = ElemType::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn into_f64(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte slice"))
    }
}

impl Scalar for f64 {
    const ELEM: ElemType = ElemType::F64;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn into_f64(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
    }
}

/// Batch x channel x height x width array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar = f64> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor { n, c, h, w, data: vec![T::zero(); n * c * h * w] }
    }

    pub fn from_data(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::dimension(format!(
                "tensor data length {} does not match {}x{}x{}x{}",
                data.len(),
                n,
                c,
                h,
                w
            )));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    /// Single-plane tensor `(1, 1, h, w)` from an image.
    pub fn from_image(image: &Image) -> Self {
        Tensor {
            n: 1,
            c: 1,
            h: image.height(),
            w: image.width(),
            data: image.data().iter().map(|&v| T::from_f64(v)).collect(),
        }
    }

    /// Stack images as the batch dimension of a single-channel tensor.
    /// All images must share one size.
    pub fn from_images(images: &[Image]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::argument("cannot build a tensor from zero images"))?;
        let (h, w) = (first.height(), first.width());
        let mut data = Vec::with_capacity(images.len() * h * w);
        for img in images {
            if img.height() != h || img.width() != w {
                return Err(Error::dimension("images in a batch must share one size"));
            }
            data.extend(img.data().iter().map(|&v| T::from_f64(v)));
        }
        Ok(Tensor { n: images.len(), c: 1, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn plane_offset(&self, n: usize, c: usize) -> usize {
        (n * self.c + c) * self.h * self.w
    }

    /// Contiguous `h*w` slice for one (batch, channel) plane.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let start = self.plane_offset(n, c);
        &self.data[start..start + self.h * self.w]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let start = self.plane_offset(n, c);
        let len = self.h * self.w;
        &mut self.data[start..start + len]
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.plane_offset(n, c) + y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: T) {
        let i = self.plane_offset(n, c) + y * self.w + x;
        self.data[i] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Copy one plane out as an `f64` image.
    pub fn plane_image(&self, n: usize, c: usize) -> Image {
        let plane = self.plane(n, c);
        Image::new(self.h, self.w, plane.iter().map(|&v| v.into_f64()).collect())
            .expect("plane dims are valid")
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().into_f64())
            .fold(0.0, f64::max)
    }
}
