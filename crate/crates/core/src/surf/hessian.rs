//! Box-filter approximation of the scale-normalized Hessian determinant.

use crate::image::IntegralImage;

use super::{DetectorParams, SurfError};

/// Relative weight of the mixed derivative; compensates for the box
/// approximation of the Gaussian second derivatives.
pub const DXY_WEIGHT: f64 = 0.9;

/// Filter side lengths of the four layers of octave `octave` (0-based):
/// 9,15,21,27 then 15,27,39,51 then 27,51,75,99 and so on.
pub fn octave_filter_sizes(octave: usize) -> [usize; 4] {
    let mut first = 9;
    let mut step = 6;
    for _ in 0..octave {
        first += step;
        step *= 2;
    }
    [first, first + step, first + 2 * step, first + 3 * step]
}

/// Gaussian scale equivalent to a filter of side `filter`.
pub fn filter_scale(filter: usize) -> f64 {
    1.2 * filter as f64 / 9.0
}

/// Determinant-of-Hessian responses for one filter size, at every pixel.
///
/// Pixels where the filter does not fit inside the image carry a zero
/// response.
#[derive(Debug, Clone)]
pub struct ResponseLayer {
    pub filter: usize,
    pub width: usize,
    pub height: usize,
    pub responses: Vec<f64>,
    /// `true` where `Dxx + Dyy >= 0` (dark blob on a bright background).
    pub laplacian: Vec<bool>,
}

impl ResponseLayer {
    #[inline]
    pub fn response(&self, x: usize, y: usize) -> f64 {
        self.responses[y * self.width + x]
    }

    /// Half-width of the filter footprint.
    pub fn border(&self) -> usize {
        (self.filter - 1) / 2
    }

    pub fn compute(ii: &IntegralImage, filter: usize) -> Self {
        let (w, h) = (ii.width(), ii.height());
        let mut responses = vec![0.0; w * h];
        let mut laplacian = vec![false; w * h];
        let b = (filter - 1) / 2;
        if w > 2 * b && h > 2 * b {
            for y in b..h - b {
                for x in b..w - b {
                    let (dxx, dyy, dxy) = box_derivatives(ii, x, y, filter);
                    responses[y * w + x] = dxx * dyy - (DXY_WEIGHT * dxy).powi(2);
                    laplacian[y * w + x] = dxx + dyy >= 0.0;
                }
            }
        }
        Self {
            filter,
            width: w,
            height: h,
            responses,
            laplacian,
        }
    }
}

/// Area-normalized `(Dxx, Dyy, Dxy)` at an interior pixel.
///
/// Lobe length is `filter / 3`. The caller guarantees the whole footprint
/// lies inside the image.
#[inline]
pub(crate) fn box_derivatives(ii: &IntegralImage, x: usize, y: usize, filter: usize) -> (f64, f64, f64) {
    let b = (filter - 1) / 2;
    let l = filter / 3;
    let inv_area = 1.0 / (filter * filter) as f64;

    // Dxx: full band of 2l-1 rows spanning the filter width, minus three
    // times the central lobe of width l.
    let band = ii.box_sum_unchecked(x - b, y - l + 1, x + b, y + l - 1);
    let mid = ii.box_sum_unchecked(x - l / 2, y - l + 1, x - l / 2 + l - 1, y + l - 1);
    let dxx = band - 3.0 * mid;

    let band = ii.box_sum_unchecked(x - l + 1, y - b, x + l - 1, y + b);
    let mid = ii.box_sum_unchecked(x - l + 1, y - l / 2, x + l - 1, y - l / 2 + l - 1);
    let dyy = band - 3.0 * mid;

    let top_left = ii.box_sum_unchecked(x - l, y - l, x - 1, y - 1);
    let bottom_right = ii.box_sum_unchecked(x + 1, y + 1, x + l, y + l);
    let top_right = ii.box_sum_unchecked(x + 1, y - l, x + l, y - 1);
    let bottom_left = ii.box_sum_unchecked(x - l, y + 1, x - 1, y + l);
    let dxy = top_left + bottom_right - top_right - bottom_left;

    (dxx * inv_area, dyy * inv_area, dxy * inv_area)
}

/// All response layers needed by the requested octaves, deduplicated by
/// filter size.
#[derive(Debug, Clone)]
pub struct ResponseStack {
    pub layers: Vec<ResponseLayer>,
    /// Per octave, indices into `layers` ordered by filter size.
    pub octaves: Vec<[usize; 4]>,
}

impl ResponseStack {
    pub fn width(&self) -> usize {
        self.layers[0].width
    }

    pub fn height(&self) -> usize {
        self.layers[0].height
    }

    pub fn layer_for_filter(&self, filter: usize) -> Option<&ResponseLayer> {
        self.layers.iter().find(|l| l.filter == filter)
    }
}

/// Computes every response layer for `params.octaves` octaves.
pub fn hessian_responses(ii: &IntegralImage, params: &DetectorParams) -> Result<ResponseStack, SurfError> {
    params.validate()?;
    let largest = octave_filter_sizes(params.octaves - 1)[3];
    let side = ii.width().min(ii.height());
    if side < largest {
        return Err(SurfError::ImageTooSmall {
            width: ii.width(),
            height: ii.height(),
            required: largest,
        });
    }

    let mut filters: Vec<usize> = (0..params.octaves).flat_map(octave_filter_sizes).collect();
    filters.sort_unstable();
    filters.dedup();

    let layers: Vec<ResponseLayer> = filters.iter().map(|&f| ResponseLayer::compute(ii, f)).collect();
    let octaves = (0..params.octaves)
        .map(|o| octave_filter_sizes(o).map(|f| filters.binary_search(&f).expect("filter present")))
        .collect();
    Ok(ResponseStack { layers, octaves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Explicit per-pixel weight kernels, convolved directly without the
    /// integral image.
    fn direct_response(img: &GrayImage, x: usize, y: usize, filter: usize) -> f64 {
        let b = (filter - 1) as i64 / 2;
        let l = (filter / 3) as i64;
        let (mut dxx, mut dyy, mut dxy) = (0.0, 0.0, 0.0);
        for dy in -b..=b {
            for dx in -b..=b {
                let v = img.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                // Dxx kernel: rows |dy| < l, weight 1 outside the central
                // lobe and -2 inside it.
                if dy.abs() < l {
                    dxx += v * if dx.abs() <= l / 2 { -2.0 } else { 1.0 };
                }
                if dx.abs() < l {
                    dyy += v * if dy.abs() <= l / 2 { -2.0 } else { 1.0 };
                }
                if dx != 0 && dy != 0 && dx.abs() <= l && dy.abs() <= l {
                    dxy += v * if (dx > 0) == (dy > 0) { 1.0 } else { -1.0 };
                }
            }
        }
        let a = (filter * filter) as f64;
        (dxx / a) * (dyy / a) - (DXY_WEIGHT * dxy / a).powi(2)
    }

    #[test]
    fn filter_sizes() {
        assert_eq!(octave_filter_sizes(0), [9, 15, 21, 27]);
        assert_eq!(octave_filter_sizes(1), [15, 27, 39, 51]);
        assert_eq!(octave_filter_sizes(2), [27, 51, 75, 99]);
    }

    #[test]
    fn constant_image_has_no_response() {
        let img = GrayImage::constant(64, 64, 0.7);
        let stack = hessian_responses(&img.integral(), &DetectorParams::default()).unwrap();
        assert_eq!(stack.layers.len(), 6);
        for layer in &stack.layers {
            assert!(layer.responses.iter().all(|r| r.abs() < 1e-12));
        }
    }

    #[test]
    fn interior_matches_direct_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(40, 36, |_, _| rng.random::<f64>());
        let ii = img.integral();
        for filter in [9, 15, 21, 27] {
            let layer = ResponseLayer::compute(&ii, filter);
            let b = (filter - 1) / 2;
            for y in b..36 - b {
                for x in b..40 - b {
                    let d = direct_response(&img, x, y, filter);
                    assert!(
                        (layer.response(x, y) - d).abs() < 1e-12,
                        "filter {filter} at ({x},{y})"
                    );
                }
            }
            // outside the footprint the response is defined as zero
            assert_eq!(layer.response(0, 0), 0.0);
        }
    }

    #[test]
    fn too_small_for_octaves() {
        let img = GrayImage::constant(40, 60, 0.5);
        let err = hessian_responses(&img.integral(), &DetectorParams::default()).unwrap_err();
        assert!(matches!(err, SurfError::ImageTooSmall { required: 51, .. }));
        let one = DetectorParams {
            octaves: 1,
            ..DetectorParams::default()
        };
        assert!(hessian_responses(&img.integral(), &one).is_ok());
    }
}
