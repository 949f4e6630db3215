//! Terrain texture segmentation from sparse salient features.
//!
//! Upright SURF features are classified into grass, trees and road by a
//! nearest-neighbour or MLP model, spread into a dense class map with a
//! Gaussian-weighted vote, and carried across video frames by matching
//! and two-view pose filtering.

pub mod classify;
pub mod config;
pub mod fixtures;
pub mod image;
pub mod pipeline;
pub mod segment;
pub mod surf;
pub mod synth;
pub mod texmodel;
pub mod track;

pub use classify::{Classifier, Membership3, MlpModel, NnClassifier, TrainConfig, NUM_CLASSES};
pub use config::{ClassifierKind, Config, ConfigError};
pub use image::{GrayImage, IntegralImage};
pub use pipeline::{PipelineError, Segmented, TrackedFrame, Tracker};
pub use segment::{SegParams, SegmentationMap};
pub use surf::{Descriptor36, DetectorParams, Feature, InterestPoint};
pub use synth::{Mosaic, MosaicSpec};
pub use texmodel::{LabelMap, TrainingSet};
pub use track::{Intrinsics, PoseFilter, TrackParams, TrackRecord};
