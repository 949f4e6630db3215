//! Upright 36-dimensional descriptor: 3×3 subregions of 5×5 Haar samples,
//! each subregion summarized as `(Σdx, Σdy, Σ|dx|, Σ|dy|)`.

use crate::image::IntegralImage;

use super::InterestPoint;

pub const DESCRIPTOR_LEN: usize = 36;
const SUBREGIONS: usize = 3;
const SAMPLES: usize = 5;
/// Subregion side in units of the point scale.
const SUBREGION_SIDE: f64 = 4.0;
const GAUSS_SIGMA: f64 = 3.3;
/// Raw vectors whose norm falls below this fraction of the total box mass
/// touched are rounding noise on a flat patch.
const FLAT_RELATIVE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor36(pub [f64; DESCRIPTOR_LEN]);

impl Default for Descriptor36 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Descriptor36 {
    pub const fn zero() -> Self {
        Self([0.0; DESCRIPTOR_LEN])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    #[inline]
    pub fn distance_sq(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Haar wavelet side for a point of scale `s`: `2s`, rounded to an even
/// pixel count of at least 2.
pub fn haar_size(scale: f64) -> usize {
    2 * (scale.round() as usize).max(1)
}

/// Computes the upright descriptor of `p`.
///
/// The 12s×12s window is centered on the point. Samples whose Haar window
/// would leave the image are dropped, so both a flat patch and a constant
/// offset contribute exactly nothing.
pub fn describe(ii: &IntegralImage, p: &InterestPoint) -> Descriptor36 {
    let s = p.scale;
    let size = haar_size(s);
    let half_window = SUBREGION_SIDE * s * SUBREGIONS as f64 / 2.0;
    let spacing = SUBREGION_SIDE * s / SAMPLES as f64;
    let inv_two_sigma_sq = 1.0 / (2.0 * (GAUSS_SIGMA * s).powi(2));
    let half = (size / 2) as i64;

    let mut v = [0.0; DESCRIPTOR_LEN];
    let mut mass = 0.0;
    for sy in 0..SUBREGIONS {
        for sx in 0..SUBREGIONS {
            let base = 4 * (sy * SUBREGIONS + sx);
            for j in 0..SAMPLES {
                let oy = -half_window + (sy * SAMPLES + j) as f64 * spacing + 0.5 * spacing;
                for i in 0..SAMPLES {
                    let ox = -half_window + (sx * SAMPLES + i) as f64 * spacing + 0.5 * spacing;
                    let cx = (p.x + ox).round() as i64;
                    let cy = (p.y + oy).round() as i64;
                    if !ii.haar_fits(cx, cy, size) {
                        continue;
                    }
                    let g = (-(ox * ox + oy * oy) * inv_two_sigma_sq).exp();
                    let (cxu, cyu, h) = (cx as usize, cy as usize, half as usize);
                    let right = ii.box_sum_unchecked(cxu, cyu - h, cxu + h - 1, cyu + h - 1);
                    let left = ii.box_sum_unchecked(cxu - h, cyu - h, cxu - 1, cyu + h - 1);
                    let bottom = ii.box_sum_unchecked(cxu - h, cyu, cxu + h - 1, cyu + h - 1);
                    let top = ii.box_sum_unchecked(cxu - h, cyu - h, cxu + h - 1, cyu - 1);
                    let dx = g * (right - left);
                    let dy = g * (bottom - top);
                    v[base] += dx;
                    v[base + 1] += dy;
                    v[base + 2] += dx.abs();
                    v[base + 3] += dy.abs();
                    mass += g * (right.abs() + left.abs());
                }
            }
        }
    }

    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || norm <= FLAT_RELATIVE * mass {
        return Descriptor36::zero();
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Descriptor36(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(x: f64, y: f64, scale: f64) -> InterestPoint {
        InterestPoint {
            x,
            y,
            scale,
            strength: 1.0,
            laplacian_positive: true,
        }
    }

    fn random_field(seed: u64, w: usize, h: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..w * h).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn flat_patch_is_zero() {
        let ii = IntegralImage::from_values(64, 64, &[0.37; 64 * 64]);
        assert!(describe(&ii, &point(32.0, 32.0, 2.0)).is_zero());
        // near the border too
        assert!(describe(&ii, &point(2.0, 60.0, 3.0)).is_zero());
    }

    #[test]
    fn unit_norm_and_invariances() {
        let (w, h) = (80, 72);
        let base = random_field(21, w, h);
        let ii = IntegralImage::from_values(w, h, &base);
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.8).collect();
        let scaled: Vec<f64> = base.iter().map(|v| v * 3.7).collect();
        let ii_shift = IntegralImage::from_values(w, h, &shifted);
        let ii_scale = IntegralImage::from_values(w, h, &scaled);
        for (x, y, s) in [(40.0, 36.0, 2.0), (10.0, 10.0, 1.6), (75.0, 3.0, 3.2), (30.0, 50.0, 4.4)] {
            let p = point(x, y, s);
            let d = describe(&ii, &p);
            assert!((d.norm() - 1.0).abs() < 1e-9);
            for other in [describe(&ii_shift, &p), describe(&ii_scale, &p)] {
                for k in 0..DESCRIPTOR_LEN {
                    assert!((d.0[k] - other.0[k]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn haar_sizes_are_even() {
        assert_eq!(haar_size(0.3), 2);
        assert_eq!(haar_size(1.6), 4);
        assert_eq!(haar_size(2.4), 4);
        assert_eq!(haar_size(4.0), 8);
    }
}
