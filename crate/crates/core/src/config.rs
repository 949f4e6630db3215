//! Run configuration: one TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::TrainConfig;
use crate::segment::SegParams;
use crate::surf::DetectorParams;
use crate::synth::{derive_seed, MosaicSpec};
use crate::track::{Intrinsics, TrackParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected key.path=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Nn,
    Mlp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnParams {
    /// Membership bandwidth; estimated from the training set when absent.
    pub tau: Option<f64>,
}

/// Training-set cleanup and the dense/non-dense analysis split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub enabled: bool,
    /// Neighbours used for the isolation score.
    pub k: usize,
    /// Features whose score exceeds this quantile are dropped.
    pub quantile: f64,
    /// Neighbours that must agree for a feature to count as dense.
    pub dense_k: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            enabled: true,
            k: 5,
            quantile: 0.95,
            dense_k: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkParams {
    pub train_images: usize,
    pub test_images: usize,
    pub sequence_frames: usize,
    /// Horizontal camera motion per frame, pixels.
    pub sequence_step: usize,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            train_images: 12,
            test_images: 4,
            sequence_frames: 10,
            sequence_step: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root seed. Component seeds (mosaics, weight init, RANSAC) are derived
    /// from it and any values given for them are replaced.
    pub seed: u64,
    pub detector: DetectorParams,
    pub classifier: ClassifierKind,
    pub nn: NnParams,
    pub filter: FilterParams,
    pub train: TrainConfig,
    pub segment: SegParams,
    pub track: TrackParams,
    pub intrinsics: Intrinsics,
    /// Metric length assigned to each unit-direction translation estimate.
    pub translation_scale: f64,
    pub mosaic: MosaicSpec,
    pub benchmark: BenchmarkParams,
    /// Default directory for command outputs.
    pub output: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            detector: DetectorParams::default(),
            classifier: ClassifierKind::Nn,
            nn: NnParams::default(),
            filter: FilterParams::default(),
            train: TrainConfig::default(),
            segment: SegParams::default(),
            track: TrackParams::default(),
            intrinsics: Intrinsics::default(),
            translation_scale: 1.0,
            mosaic: MosaicSpec::default(),
            benchmark: BenchmarkParams::default(),
            output: PathBuf::from("out"),
        }
        .with_derived_seeds()
    }
}

const STREAM_MOSAIC: u64 = 101;
const STREAM_WEIGHTS: u64 = 102;
const STREAM_RANSAC: u64 = 103;

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg = cfg.with_derived_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn with_derived_seeds(mut self) -> Self {
        // TOML integers are signed 64-bit
        let derive = |stream| derive_seed(self.seed, stream, 0) >> 1;
        self.mosaic.seed = derive(STREAM_MOSAIC);
        self.train.seed = derive(STREAM_WEIGHTS);
        self.track.ransac.seed = derive(STREAM_RANSAC);
        self
    }

    /// Applies `key.path=value` overrides in order, then re-derives seeds
    /// and validates. Values parse as TOML literals, falling back to bare
    /// strings.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut doc = toml::Value::try_from(&self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.to_string()))?;
            let value = parse_value(raw.trim());
            let mut node = &mut doc;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node.as_table_mut().ok_or_else(|| ConfigError::Override(o.to_string()))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let cfg: Config = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let cfg = cfg.with_derived_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.detector.validate().map_err(|e| inv(&e))?;
        self.train.validate().map_err(|e| inv(&e))?;
        self.segment.validate().map_err(|e| inv(&e))?;
        self.track.validate().map_err(|e| inv(&e))?;
        self.intrinsics.validate().map_err(|e| inv(&e))?;
        self.mosaic.validate().map_err(|e| inv(&e))?;
        if let Some(t) = self.nn.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::Invalid(format!("nn.tau must be positive, got {t}")));
            }
        }
        let f = &self.filter;
        if f.k == 0 || f.dense_k == 0 || !(0.0..=1.0).contains(&f.quantile) {
            return Err(ConfigError::Invalid("filter needs k, dense_k >= 1 and quantile in [0, 1]".into()));
        }
        if !(self.translation_scale > 0.0 && self.translation_scale.is_finite()) {
            return Err(ConfigError::Invalid("translation_scale must be positive".into()));
        }
        let b = &self.benchmark;
        if b.train_images == 0 || b.test_images == 0 || b.sequence_frames < 2 {
            return Err(ConfigError::Invalid(
                "benchmark needs at least one training and test image and two frames".into(),
            ));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Algorithm;

    #[test]
    fn default_round_trips_through_toml() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(Config::from_toml("").unwrap(), c);
    }

    #[test]
    fn overrides_win_and_parse_types() {
        let c = Config::from_toml("seed = 4\n[segment]\nradius = 30.0\n").unwrap();
        let c = c
            .with_overrides(&["segment.radius=20", "classifier=mlp", "train.algorithm=lm", "nn.tau=0.3"])
            .unwrap();
        assert_eq!(c.segment.radius, 20.0);
        assert_eq!(c.classifier, ClassifierKind::Mlp);
        assert_eq!(c.train.algorithm, Algorithm::Lm);
        assert_eq!(c.nn.tau, Some(0.3));
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn seeds_follow_root() {
        let a = Config::default();
        let b = Config::default().with_overrides(&["seed=2"]).unwrap();
        assert_ne!(a.mosaic.seed, b.mosaic.seed);
        assert_ne!(a.train.seed, b.train.seed);
        // component seeds cannot be pinned independently
        let c = Config::default().with_overrides(&["train.seed=99"]).unwrap();
        assert_eq!(c.train.seed, a.train.seed);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(Config::from_toml("[segment]\nsigma = -1.0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::default().with_overrides(&["noequals"]), Err(ConfigError::Override(_))));
        assert!(Config::default().with_overrides(&["detector.octaves=9"]).is_err());
        assert!(matches!(Config::load("/nonexistent/cfg.toml"), Err(ConfigError::Io { .. })));
    }
}
