//! Fast-Hessian interest points, grid-based selection of the strongest
//! points, and the upright 36-dimensional descriptor.

mod descriptor;
mod detect;
pub mod hessian;
mod io;

pub use descriptor::{describe, haar_size, Descriptor36, DESCRIPTOR_LEN};
pub use detect::{detect, grid_select};
pub use hessian::{hessian_responses, ResponseLayer, ResponseStack};
pub use io::{read_features, read_features_csv, write_features, write_features_csv, FeatureCsvError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Membership3;
use crate::image::{GrayImage, IntegralImage};

#[derive(Debug, Error, PartialEq)]
pub enum SurfError {
    #[error("image {width}x{height} is smaller than the largest filter ({required} px)")]
    ImageTooSmall {
        width: usize,
        height: usize,
        required: usize,
    },
    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian scale equivalent of the detecting filter, in pixels.
    pub scale: f64,
    /// Determinant-of-Hessian response.
    pub strength: f64,
    /// Sign of the Laplacian (`Dxx + Dyy >= 0`).
    pub laplacian_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub octaves: usize,
    /// Minimum determinant response of a detected point.
    pub threshold: f64,
    /// Side of the selection grid cell, pixels.
    pub cell: usize,
    pub max_features: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            octaves: 2,
            threshold: 1e-4,
            cell: 16,
            max_features: 1500,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), SurfError> {
        if self.octaves == 0 || self.octaves > 4 {
            return Err(SurfError::InvalidParams(format!(
                "octaves must be in 1..=4, got {}",
                self.octaves
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(SurfError::InvalidParams(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.cell == 0 || self.max_features == 0 {
            return Err(SurfError::InvalidParams(
                "cell and max_features must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A described interest point, optionally labeled and classified.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub point: InterestPoint,
    pub desc: Descriptor36,
    /// Terrain class 1..=3, or 0 when unlabeled.
    pub label: u8,
    pub membership: Option<Membership3>,
}

impl Feature {
    pub fn new(point: InterestPoint, desc: Descriptor36) -> Self {
        Self {
            point,
            desc,
            label: 0,
            membership: None,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.point.x, self.point.y)
    }
}

/// Detection, grid selection and description in one pass.
pub fn extract(img: &GrayImage, params: &DetectorParams) -> Result<Vec<Feature>, SurfError> {
    let ii = IntegralImage::new(img);
    extract_from_integral(&ii, params)
}

pub fn extract_from_integral(ii: &IntegralImage, params: &DetectorParams) -> Result<Vec<Feature>, SurfError> {
    let stack = hessian_responses(ii, params)?;
    let points = detect(&stack, params);
    let mut selected = grid_select(&points, params.cell, ii.width(), ii.height());
    selected.truncate(params.max_features);
    Ok(selected
        .into_iter()
        .map(|p| Feature::new(p, describe(ii, &p)))
        .collect())
}
