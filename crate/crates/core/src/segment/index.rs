use std::collections::HashMap;

use super::SegmentError;
use crate::classify::Membership3;
use crate::surf::Feature;

/// Feature positions bucketed on a square grid with cell size `r`, so a
/// radius-`r` query touches at most 3×3 cells.
#[derive(Debug, Clone, Default)]
pub struct FeatureIndex {
    radius: f64,
    points: Vec<([f64; 2], Membership3)>,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl FeatureIndex {
    pub fn new(points: Vec<([f64; 2], Membership3)>, radius: f64) -> Self {
        assert!(radius > 0.0, "radius must be positive");
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, (p, _)) in points.iter().enumerate() {
            cells.entry(cell_of(p[0], p[1], radius)).or_default().push(i);
        }
        Self { radius, points, cells }
    }

    pub fn from_features(features: &[Feature], radius: f64) -> Result<Self, SegmentError> {
        let pts = features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.membership
                    .map(|m| ([f.point.x, f.point.y], m))
                    .ok_or(SegmentError::MissingMembership(i))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(pts, radius))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Calls `f(squared distance, membership)` for every point strictly
    /// closer than the radius, in insertion order.
    pub fn for_each_within(&self, x: f64, y: f64, mut f: impl FnMut(f64, &Membership3)) {
        let mut hits = self.query(x, y);
        hits.sort_unstable();
        for i in hits {
            let (p, m) = &self.points[i];
            f((x - p[0]).powi(2) + (y - p[1]).powi(2), m);
        }
    }

    /// Indices of points strictly within the radius, unordered.
    pub fn query(&self, x: f64, y: f64) -> Vec<usize> {
        let (cx, cy) = cell_of(x, y, self.radius);
        let r2 = self.radius * self.radius;
        let mut out = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        let p = self.points[i].0;
                        if (x - p[0]).powi(2) + (y - p[1]).powi(2) < r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out
    }
}

fn cell_of(x: f64, y: f64, r: f64) -> (i64, i64) {
    ((x / r).floor() as i64, (y / r).floor() as i64)
}
