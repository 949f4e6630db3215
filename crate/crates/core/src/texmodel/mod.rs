//! Labeled training sets built from hand-segmented label maps, plus the
//! separability analyses run on them: isolated-feature filtering,
//! dense/non-dense splitting, mean pairwise variability and a 2-D PCA view.

mod pca;
mod variability;

pub use pca::{pca2, Pca2};
pub use variability::{variability, variability_matrix, VariabilityMatrix};

use std::path::Path;

use thiserror::Error;

use crate::classify::NUM_CLASSES;
use crate::image::{read_pgm_raw, save_pgm_levels, PgmError};
use crate::surf::Feature;

#[derive(Debug, Error)]
pub enum TexModelError {
    #[error("label map is {map_w}x{map_h} but the frame is {frame_w}x{frame_h}")]
    SizeMismatch {
        map_w: usize,
        map_h: usize,
        frame_w: usize,
        frame_h: usize,
    },
    #[error("label value {0} is outside 0..=3")]
    InvalidLabel(u16),
    #[error("class {class} has {count} features, need more than {k}")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("feature set is empty")]
    EmptySet,
    #[error("class {0} has no features")]
    EmptyClass(u8),
    #[error("need at least {needed} features, got {got}")]
    TooFewFeatures { needed: usize, got: usize },
    #[error("all features are identical; no principal direction")]
    Degenerate,
    #[error(transparent)]
    Pgm(#[from] PgmError),
}

/// Per-pixel terrain classes: 0 unknown, 1 grass and small shrubs,
/// 2 trees, 3 road including gravel and soil.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self, TexModelError> {
        assert_eq!(labels.len(), width * height, "label count mismatch");
        if let Some(&bad) = labels.iter().find(|&&l| l as usize > NUM_CLASSES) {
            return Err(TexModelError::InvalidLabel(u16::from(bad)));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, TexModelError> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Reads a PGM whose raw sample values are the class indices.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TexModelError> {
        let raw = read_pgm_raw(path)?;
        if let Some(&bad) = raw.samples.iter().find(|&&s| s as usize > NUM_CLASSES) {
            return Err(TexModelError::InvalidLabel(bad));
        }
        let labels = raw.samples.iter().map(|&s| s as u8).collect();
        Self::new(raw.width, raw.height, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        save_pgm_levels(self.width, self.height, &self.labels, path)
    }

    /// Pixel count per class 0..=3.
    pub fn histogram(&self) -> [usize; NUM_CLASSES + 1] {
        let mut h = [0; NUM_CLASSES + 1];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// Features carrying class labels 1..=3.
///
/// Within one frame no two features share an `(x, y, scale)` triple; sets
/// merged across frames keep every frame's features.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    features: Vec<Feature>,
}

impl TrainingSet {
    /// Wraps already-labeled features; anything labeled 0 is dropped.
    pub fn new(features: Vec<Feature>) -> Self {
        Self {
            features: features
                .into_iter()
                .filter(|f| (1..=NUM_CLASSES as u8).contains(&f.label))
                .collect(),
        }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn into_features(self) -> Vec<Feature> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature count of classes 1, 2 and 3.
    pub fn counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for f in &self.features {
            c[f.label as usize - 1] += 1;
        }
        c
    }

    pub fn class(&self, label: u8) -> impl Iterator<Item = &Feature> {
        self.features.iter().filter(move |f| f.label == label)
    }

    pub fn extend(&mut self, other: TrainingSet) {
        self.features.extend(other.features);
    }
}

/// Labels each feature from the map at its rounded position and drops
/// features on unknown (0) pixels.
pub fn label_features(features: &[Feature], map: &LabelMap, frame_w: usize, frame_h: usize) -> Result<TrainingSet, TexModelError> {
    if map.width != frame_w || map.height != frame_h {
        return Err(TexModelError::SizeMismatch {
            map_w: map.width,
            map_h: map.height,
            frame_w,
            frame_h,
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for f in features {
        let x = f.point.x.round();
        let y = f.point.y.round();
        if x < 0.0 || y < 0.0 || x >= frame_w as f64 || y >= frame_h as f64 {
            continue;
        }
        let label = map.get(x as usize, y as usize);
        if label == 0 {
            continue;
        }
        let key = (f.point.x.to_bits(), f.point.y.to_bits(), f.point.scale.to_bits());
        if !seen.insert(key) {
            continue;
        }
        let mut g = f.clone();
        g.label = label;
        out.push(g);
    }
    Ok(TrainingSet { features: out })
}

/// Indices of the `k` nearest descriptors to `query` among `pool`,
/// excluding `skip`. Ties go to the lower index.
pub(crate) fn k_nearest(pool: &[&Feature], query: usize, k: usize) -> Vec<(usize, f64)> {
    let q = &pool[query].desc;
    let mut d: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(i, f)| (i, q.distance(&f.desc)))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    let by = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    d.select_nth_unstable_by(k - 1, by);
    d.truncate(k);
    d.sort_by(by);
    d
}

/// Linear-interpolated sample quantile (the R type-7 definition).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Drops features that sit far from the rest of their own class.
///
/// A feature's isolation is its mean descriptor distance to its `k` nearest
/// same-class neighbors. Features whose isolation exceeds the class's
/// `q`-quantile of that statistic are removed.
pub fn filter_isolated(ts: &TrainingSet, k: usize, q: f64) -> Result<TrainingSet, TexModelError> {
    let mut keep = vec![true; ts.features.len()];
    for label in 1..=NUM_CLASSES as u8 {
        let idx: Vec<usize> = (0..ts.features.len())
            .filter(|&i| ts.features[i].label == label)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() <= k {
            return Err(TexModelError::ClassTooSmall {
                class: label,
                count: idx.len(),
                k,
            });
        }
        let pool: Vec<&Feature> = idx.iter().map(|&i| &ts.features[i]).collect();
        let isolation: Vec<f64> = (0..pool.len())
            .map(|i| {
                let nn = k_nearest(&pool, i, k);
                nn.iter().map(|(_, d)| d).sum::<f64>() / k as f64
            })
            .collect();
        let cut = quantile(&isolation, q);
        for (j, &i) in idx.iter().enumerate() {
            if isolation[j] > cut {
                keep[i] = false;
            }
        }
    }
    Ok(TrainingSet {
        features: ts
            .features
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(f, _)| f.clone())
            .collect(),
    })
}

/// Splits into features whose `k` nearest descriptor-space neighbors all
/// share their class (dense) and the rest.
///
/// With fewer than `k` other features, all of them act as the neighborhood.
pub fn split_dense(ts: &TrainingSet, k: usize) -> (TrainingSet, TrainingSet) {
    let pool: Vec<&Feature> = ts.features.iter().collect();
    let mut dense = Vec::new();
    let mut nondense = Vec::new();
    for (i, f) in ts.features.iter().enumerate() {
        let nn = k_nearest(&pool, i, k);
        if nn.iter().all(|(j, _)| pool[*j].label == f.label) {
            dense.push(f.clone());
        } else {
            nondense.push(f.clone());
        }
    }
    (
        TrainingSet { features: dense },
        TrainingSet { features: nondense },
    )
}
