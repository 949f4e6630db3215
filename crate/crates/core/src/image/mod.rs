//! Grayscale rasters and the summed-area machinery every filter in the
//! crate is built on.

mod integral;
mod pgm;

pub use integral::{IntegralImage, Rect};
pub use pgm::{
    load_pgm, parse_pgm, read_pgm_raw, save_pgm, save_pgm_levels, save_ppm, write_pgm, PgmError,
    PgmRaster,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("expected {expected} pixels for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pixel {index} has value {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

/// Single-channel image with intensities normalized to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel; values are
    /// clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Copies out the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Option<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return None;
        }
        Some(Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }

    pub fn integral(&self) -> IntegralImage {
        IntegralImage::new(self)
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert_eq!(
            GrayImage::new(0, 3, vec![]),
            Err(ImageError::EmptyImage {
                width: 0,
                height: 3
            })
        );
        assert!(matches!(
            GrayImage::new(2, 2, vec![0.0; 3]),
            Err(ImageError::LengthMismatch { .. })
        ));
        assert!(matches!(
            GrayImage::new(1, 2, vec![0.5, 1.5]),
            Err(ImageError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn crop_copies_window() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x + 4 * y) as f64 / 12.0);
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.data(), &[5.0 / 12.0, 6.0 / 12.0, 9.0 / 12.0, 10.0 / 12.0]);
        assert!(img.crop(3, 0, 2, 1).is_none());
    }
}
