//! Frame-to-frame tracking: feature matching, epipolar geometry, pose
//! filtering and membership transfer.

mod filter;
mod geometry;
mod linalg;
mod matching;

pub use filter::{quat_exp, quat_from_rotation, quat_mul, quat_to_rotation, FilterParams, PoseFilter};
pub use geometry::{
    balance, decompose, eight_point, essential, ppm, project, ransac_f, sampson_distance, skew, triangulate,
    Correspondence, Intrinsics, Pose, Projection, RansacFit, RansacParams, TriPoint,
};
pub use matching::{match_features, transfer_memberships, Match};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surf::Feature;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewMatches { needed: usize, got: usize },
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("no epipolar model has at least 8 inliers")]
    NoModel,
    #[error("no pose candidate puts a strict majority of points in front of both cameras")]
    CheiralityTie,
    #[error("point projects to infinity")]
    AtInfinity,
    #[error("invalid tracking parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    /// Search radius in pixels.
    pub radius: f64,
    /// Descriptor distance threshold.
    pub theta: f64,
    pub ransac: RansacParams,
    pub filter: FilterParams,
    /// Frame interval.
    pub dt: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            radius: 60.0,
            theta: 0.25,
            ransac: RansacParams::default(),
            filter: FilterParams::default(),
            dt: 1.0,
        }
    }
}

impl TrackParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.radius > 0.0 && self.theta > 0.0 && self.dt > 0.0) {
            return Err(TrackError::InvalidParams("radius, theta and dt must be positive".into()));
        }
        let r = &self.ransac;
        if !(r.tol > 0.0 && r.confidence > 0.0 && r.confidence < 1.0 && r.max_iters > 0) {
            return Err(TrackError::InvalidParams(
                "ransac needs tol > 0, confidence in (0, 1), max_iters > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Pixel correspondences for a match list.
pub fn correspondences(matches: &[Match], prev: &[Feature], curr: &[Feature]) -> Vec<Correspondence> {
    matches
        .iter()
        .map(|m| {
            let p = &prev[m.prev].point;
            let c = &curr[m.curr].point;
            ([p.x, p.y], [c.x, c.y])
        })
        .collect()
}

/// One row of the per-frame tracking log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: usize,
    pub detected: usize,
    pub matched: usize,
    pub inliers: usize,
    /// Inliers over the mean feature count of the two frames.
    pub ratio: f64,
}

impl TrackRecord {
    pub const HEADER: &'static str = "frame,detected,matched,inliers,ratio";

    pub fn new(frame: usize, detected_prev: usize, detected: usize, matched: usize, inliers: usize) -> Self {
        let mean = 0.5 * (detected_prev + detected) as f64;
        Self {
            frame,
            detected,
            matched,
            inliers,
            ratio: if mean > 0.0 { inliers as f64 / mean } else { 0.0 },
        }
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{:.6}", self.frame, self.detected, self.matched, self.inliers, self.ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_ratio() {
        let r = TrackRecord::new(3, 100, 120, 80, 55);
        assert!((r.ratio - 0.5).abs() < 1e-15);
        assert_eq!(r.csv_row(), "3,120,80,55,0.500000");
        assert_eq!(TrackRecord::new(0, 0, 0, 0, 0).ratio, 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(TrackParams::default().validate().is_ok());
        let bad = TrackParams {
            theta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
