//! Per-pixel segmentation from classified features by Gaussian-weighted
//! membership voting, and error-rate evaluation against label maps.

mod index;

pub use index::FeatureIndex;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Membership3, NUM_CLASSES};
use crate::image::{save_pgm_levels, save_ppm};
use crate::texmodel::LabelMap;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
    #[error("feature {0} has no membership; classify before segmenting")]
    MissingMembership(usize),
    #[error("map is {seg_w}x{seg_h} but the truth is {truth_w}x{truth_h}")]
    SizeMismatch {
        seg_w: usize,
        seg_h: usize,
        truth_w: usize,
        truth_h: usize,
    },
    #[error("ground truth has no labeled pixels")]
    Unlabeled,
    #[error("no images to summarize")]
    NoImages,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegParams {
    /// Neighborhood radius in pixels (strict `<`).
    pub radius: f64,
    /// Gaussian bandwidth in pixels.
    pub sigma: f64,
    /// A pixel is labeled only when its best class value exceeds this.
    pub threshold: f64,
    /// Use `exp(−d²/(2σ²))` instead of the default `exp(−d²/(2σ))`.
    pub sigma_squared: bool,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            radius: 48.0,
            sigma: 16.0,
            threshold: 0.0,
            sigma_squared: false,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SegmentError::InvalidParams(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SegmentError::InvalidParams(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(SegmentError::InvalidParams(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Gaussian weight for a squared pixel distance.
    pub fn weight(&self, d2: f64) -> f64 {
        let norm = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
        let denom = if self.sigma_squared {
            2.0 * self.sigma * self.sigma
        } else {
            2.0 * self.sigma
        };
        norm * (-d2 / denom).exp()
    }

    /// The largest value a single unit-membership feature can produce.
    pub fn peak_value(&self) -> f64 {
        self.weight(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    classes: Vec<u8>,
    /// Best class value per pixel, 0 for empty neighborhoods.
    values: Vec<f64>,
}

/// Display colours for classes 0..=3.
pub const CLASS_COLORS: [[u8; 3]; 4] = [[0, 0, 0], [120, 200, 60], [20, 100, 30], [150, 120, 90]];

impl SegmentationMap {
    pub fn from_classes(width: usize, height: usize, classes: Vec<u8>) -> Self {
        assert_eq!(classes.len(), width * height);
        Self {
            width,
            height,
            values: vec![0.0; classes.len()],
            classes,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn class_at(&self, x: usize, y: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        save_pgm_levels(self.width, self.height, &self.classes, path)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let rgb: Vec<[u8; 3]> = self.classes.iter().map(|&c| CLASS_COLORS[c as usize]).collect();
        save_ppm(self.width, self.height, &rgb, path)
    }

    /// Fraction of pixels whose class differs from `other`.
    pub fn disagreement(&self, other: &Self) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let diff = self.classes.iter().zip(&other.classes).filter(|(a, b)| a != b).count();
        diff as f64 / self.classes.len() as f64
    }

    /// Disagreement over the overlap when the scene moved so that
    /// `other(x, y)` shows what `self(x + dx, y + dy)` showed. `None` when
    /// the frames do not overlap.
    pub fn disagreement_shifted(&self, other: &Self, dx: i64, dy: i64) -> Option<f64> {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let (w, h) = (self.width as i64, self.height as i64);
        let xs = 0.max(-dx)..w.min(w - dx);
        let ys = 0.max(-dy)..h.min(h - dy);
        if xs.is_empty() || ys.is_empty() {
            return None;
        }
        let mut diff = 0usize;
        for y in ys.clone() {
            for x in xs.clone() {
                let a = self.classes[((y + dy) * w + x + dx) as usize];
                let b = other.classes[(y * w + x) as usize];
                diff += usize::from(a != b);
            }
        }
        Some(diff as f64 / (xs.count() * ys.count()) as f64)
    }

    pub fn to_label_map(&self) -> LabelMap {
        LabelMap::new(self.width, self.height, self.classes.clone()).expect("classes are 0..=3")
    }
}

/// Class values `V_m` at one pixel, or `None` when no feature lies within
/// the radius.
pub fn pixel_values(px: f64, py: f64, index: &FeatureIndex, params: &SegParams) -> Option<[f64; NUM_CLASSES]> {
    let mut v = [0.0; NUM_CLASSES];
    let mut count = 0usize;
    index.for_each_within(px, py, |d2, m| {
        let w = params.weight(d2);
        for c in 0..NUM_CLASSES {
            v[c] += m.0[c] * w;
        }
        count += 1;
    });
    if count == 0 {
        return None;
    }
    Some(v.map(|s| s / count as f64))
}

/// Class decision for a set of values: the arg-max (ties to the lower
/// class) if it exceeds `t`, otherwise 0.
pub fn decide(v: &[f64; NUM_CLASSES], t: f64) -> (u8, f64) {
    let (cls, best) = Membership3(*v).best();
    if best > t {
        (cls, best)
    } else {
        (0, best)
    }
}

pub fn segment(width: usize, height: usize, index: &FeatureIndex, params: &SegParams) -> Result<SegmentationMap, SegmentError> {
    params.validate()?;
    let mut classes = vec![0u8; width * height];
    let mut values = vec![0.0; width * height];
    if width == 0 || height == 0 {
        return Ok(SegmentationMap {
            width,
            height,
            classes,
            values,
        });
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(height);
    let rows_per = height.div_ceil(threads);
    std::thread::scope(|s| {
        for (chunk, (cls, val)) in classes
            .chunks_mut(rows_per * width)
            .zip(values.chunks_mut(rows_per * width))
            .enumerate()
        {
            s.spawn(move || {
                for (i, (c, v)) in cls.iter_mut().zip(val.iter_mut()).enumerate() {
                    let y = chunk * rows_per + i / width;
                    let x = i % width;
                    if let Some(vals) = pixel_values(x as f64, y as f64, index, params) {
                        (*c, *v) = decide(&vals, params.threshold);
                    }
                }
            });
        }
    });
    Ok(SegmentationMap {
        width,
        height,
        classes,
        values,
    })
}

/// Fraction of labeled truth pixels the map gets wrong (class 0 counts as
/// wrong). Unlabeled truth pixels are ignored.
pub fn error_rate(seg: &SegmentationMap, truth: &LabelMap) -> Result<f64, SegmentError> {
    if seg.width != truth.width() || seg.height != truth.height() {
        return Err(SegmentError::SizeMismatch {
            seg_w: seg.width,
            seg_h: seg.height,
            truth_w: truth.width(),
            truth_h: truth.height(),
        });
    }
    let mut labeled = 0usize;
    let mut wrong = 0usize;
    for (&s, &t) in seg.classes.iter().zip(truth.labels()) {
        if t == 0 {
            continue;
        }
        labeled += 1;
        if s != t {
            wrong += 1;
        }
    }
    if labeled == 0 {
        return Err(SegmentError::Unlabeled);
    }
    Ok(wrong as f64 / labeled as f64)
}

/// Summary of per-image error rates, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Sample standard deviation (`n − 1`); 0 for a single image.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ErrorStats {
    /// `rates` are fractions in `[0, 1]`.
    pub fn from_rates(rates: &[f64]) -> Result<Self, SegmentError> {
        if rates.is_empty() {
            return Err(SegmentError::NoImages);
        }
        let pct: Vec<f64> = rates.iter().map(|r| r * 100.0).collect();
        let n = pct.len() as f64;
        let mean = pct.iter().sum::<f64>() / n;
        let std = if pct.len() > 1 {
            (pct.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std,
            min: pct.iter().copied().fold(f64::INFINITY, f64::min),
            max: pct.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: pct.len(),
        })
    }
}

pub fn evaluate(segs: &[SegmentationMap], truths: &[LabelMap]) -> Result<ErrorStats, SegmentError> {
    assert_eq!(segs.len(), truths.len(), "one truth per map");
    let rates = segs
        .iter()
        .zip(truths)
        .map(|(s, t)| error_rate(s, t))
        .collect::<Result<Vec<_>, _>>()?;
    ErrorStats::from_rates(&rates)
}

/// Error-rate summary with one row per statistic and one column per
/// `(classifier, set)` pair, percentages to two decimals.
pub fn stats_table(columns: &[(&str, &str, ErrorStats)]) -> String {
    let mut out = String::from("statistic");
    for (c, set, _) in columns {
        out.push_str(&format!(",{c} {set}"));
    }
    out.push('\n');
    let rows: [(&str, fn(&ErrorStats) -> f64); 4] =
        [("mean", |s| s.mean), ("std", |s| s.std), ("min", |s| s.min), ("max", |s| s.max)];
    for (name, get) in rows {
        out.push_str(name);
        for (_, _, st) in columns {
            out.push_str(&format!(",{:.2}", get(st)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(t: f64) -> SegParams {
        SegParams {
            radius: 6.0,
            sigma: 2.5,
            threshold: t,
            sigma_squared: false,
        }
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, w: f64, h: f64) -> Vec<([f64; 2], Membership3)> {
        (0..n)
            .map(|_| {
                (
                    [rng.random_range(0.0..w), rng.random_range(0.0..h)],
                    Membership3(std::array::from_fn(|_| rng.random::<f64>())),
                )
            })
            .collect()
    }

    fn oracle(pts: &[([f64; 2], Membership3)], x: f64, y: f64, p: &SegParams) -> Option<[f64; 3]> {
        let mut v = [0.0; 3];
        let mut n = 0;
        for (l, m) in pts {
            let d2 = (x - l[0]).powi(2) + (y - l[1]).powi(2);
            if d2.sqrt() < p.radius {
                let w = (1.0 / (p.sigma * (2.0 * std::f64::consts::PI).sqrt())) * (-d2 / (2.0 * p.sigma)).exp();
                for c in 0..3 {
                    v[c] += m.0[c] * w;
                }
                n += 1;
            }
        }
        (n > 0).then(|| v.map(|s| s / n as f64))
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_points(&mut rng, 40, 32.0, 32.0);
        let p = params(0.0);
        let idx = FeatureIndex::new(pts.clone(), p.radius);
        let map = segment(32, 32, &idx, &p).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let o = oracle(&pts, x as f64, y as f64, &p);
                let got = pixel_values(x as f64, y as f64, &idx, &p);
                match (o, got) {
                    (None, None) => assert_eq!(map.class_at(x, y), 0),
                    (Some(a), Some(b)) => {
                        for c in 0..3 {
                            assert!((a[c] - b[c]).abs() < 1e-12);
                        }
                        assert_eq!(map.class_at(x, y), decide(&a, 0.0).0);
                    }
                    _ => panic!("neighborhood mismatch at {x},{y}"),
                }
            }
        }
    }

    #[test]
    fn single_feature_cases() {
        let p = params(0.0);
        let idx = FeatureIndex::new(vec![([5.0, 5.0], Membership3([1.0, 0.0, 0.0]))], p.radius);
        let v = pixel_values(5.0, 5.0, &idx, &p).unwrap();
        assert_eq!(v[0], p.peak_value());
        assert_eq!(segment(12, 12, &idx, &p).unwrap().class_at(5, 5), 1);
        // far pixel: empty neighborhood
        assert_eq!(segment(12, 12, &idx, &p).unwrap().class_at(11, 11), 0);
        let above = SegParams {
            threshold: p.peak_value() + 1e-9,
            ..p
        };
        assert!(segment(12, 12, &idx, &above).unwrap().classes().iter().all(|&c| c == 0));
    }

    #[test]
    fn order_invariant_and_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let pts = random_points(&mut rng, 30, 32.0, 32.0);
            let mut rev = pts.clone();
            rev.reverse();
            let p = params(0.0);
            let a = segment(32, 32, &FeatureIndex::new(pts.clone(), p.radius), &p).unwrap();
            let b = segment(32, 32, &FeatureIndex::new(rev, p.radius), &p).unwrap();
            assert_eq!(a.classes(), b.classes());
            let mut prev = a;
            for t in [0.01, 0.03, 0.06, 0.1, 0.2] {
                let p = params(t);
                let next = segment(32, 32, &FeatureIndex::new(pts.clone(), p.radius), &p).unwrap();
                for (o, n) in prev.classes().iter().zip(next.classes()) {
                    assert!(n == o || *n == 0);
                }
                prev = next;
            }
        }
    }

    #[test]
    fn variant_weight() {
        let p = SegParams {
            sigma_squared: true,
            ..params(0.0)
        };
        let expect = (-9.0f64 / (2.0 * 6.25)).exp() / (2.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((p.weight(9.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(SegParams::default().validate().is_ok());
        for bad in [
            SegParams { radius: 0.0, ..Default::default() },
            SegParams { sigma: -1.0, ..Default::default() },
            SegParams { threshold: 1.5, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn error_rates() {
        let truth = LabelMap::from_fn(4, 4, |x, _| (x % 4) as u8).unwrap();
        let same = SegmentationMap::from_classes(4, 4, truth.labels().to_vec());
        assert_eq!(error_rate(&same, &truth).unwrap(), 0.0);
        let zero = SegmentationMap::from_classes(4, 4, vec![0; 16]);
        assert_eq!(error_rate(&zero, &truth).unwrap(), 1.0);
        let unl = LabelMap::new(4, 4, vec![0; 16]).unwrap();
        assert_eq!(error_rate(&zero, &unl), Err(SegmentError::Unlabeled));
        let small = SegmentationMap::from_classes(2, 2, vec![0; 4]);
        assert!(matches!(error_rate(&small, &truth), Err(SegmentError::SizeMismatch { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let t: Vec<u8> = (0..100).map(|_| rng.random_range(0..4)).collect();
            let s: Vec<u8> = (0..100).map(|_| rng.random_range(0..4)).collect();
            let labeled = t.iter().filter(|&&v| v != 0).count();
            let wrong = t.iter().zip(&s).filter(|(a, b)| **a != 0 && a != b).count();
            let truth = LabelMap::new(10, 10, t).unwrap();
            let seg = SegmentationMap::from_classes(10, 10, s);
            assert_eq!(error_rate(&seg, &truth).unwrap(), wrong as f64 / labeled as f64);
        }
    }

    #[test]
    fn stats() {
        let s = ErrorStats::from_rates(&[0.1, 0.2, 0.3]).unwrap();
        assert!((s.mean - 20.0).abs() < 1e-12);
        assert!((s.std - 10.0).abs() < 1e-12);
        assert_eq!((s.min, s.max, s.count), (10.0, 30.0, 3));
        assert_eq!(ErrorStats::from_rates(&[0.5]).unwrap().std, 0.0);
        assert_eq!(ErrorStats::from_rates(&[]), Err(SegmentError::NoImages));
        assert_eq!(
            stats_table(&[("NN", "test", s), ("MLP", "test", s)]),
            "statistic,NN test,MLP test\nmean,20.00,20.00\nstd,10.00,10.00\nmin,10.00,10.00\nmax,30.00,30.00\n"
        );
    }

    #[test]
    fn shifted_disagreement() {
        let a = SegmentationMap::from_classes(4, 2, vec![1, 2, 3, 1, 2, 2, 3, 3]);
        // content moved left by one column
        let b = SegmentationMap::from_classes(4, 2, vec![2, 3, 1, 0, 2, 3, 3, 1]);
        assert_eq!(a.disagreement_shifted(&b, 1, 0), Some(0.0));
        assert_eq!(a.disagreement_shifted(&b, 0, 0), Some(6.0 / 8.0));
        assert_eq!(b.disagreement_shifted(&a, -1, 0), Some(0.0));
        assert_eq!(a.disagreement_shifted(&b, 4, 0), None);
    }
}
