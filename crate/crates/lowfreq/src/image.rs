//! Dense 2D real array, the carrier for grayscale images and single feature
//! planes.

use crate::error::{Error, Result};

/// Row-major `height x width` array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dimension("image dimensions must be nonzero"));
        }
        if data.len() != height * width {
            return Err(Error::dimension(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Image { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Image { height, width, data: vec![0.0; height * width] }
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Image { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Image { height, width, data }
    }

    /// Alternating `+1/-1` pattern, the highest representable spatial
    /// frequency on an even-sized grid.
    pub fn checkerboard(height: usize, width: usize) -> Self {
        Image::from_fn(height, width, |y, x| if (y + x) % 2 == 0 { 1.0 } else { -1.0 })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sum of squared values.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Sum of squared deviations from the mean.
    pub fn ac_energy(&self) -> f64 {
        let mean = self.mean();
        self.data.iter().map(|v| (v - mean) * (v - mean)).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &Image) -> Result<Image> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::dimension("image sizes differ"));
        }
        Ok(Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Elementwise sum `self + other`.
    pub fn add(&self, other: &Image) -> Result<Image> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::dimension("image sizes differ"));
        }
        Ok(Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_data() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn checkerboard_has_zero_mean_on_even_grids() {
        let cb = Image::checkerboard(8, 8);
        assert_eq!(cb.mean(), 0.0);
        assert_eq!(cb.energy(), 64.0);
    }

    #[test]
    fn complement_identities() {
        let a = Image::from_fn(3, 4, |y, x| (y * 7 + x) as f64);
        let b = Image::constant(3, 4, 2.0);
        let d = a.sub(&b).unwrap();
        let s = d.add(&b).unwrap();
        assert_eq!(s, a);
    }
}
