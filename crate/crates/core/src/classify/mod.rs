//! Per-descriptor class membership: instance-based nearest neighbor and a
//! two-hidden-layer perceptron trained with RPROP or Levenberg–Marquardt.

mod mlp;
mod nn;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mlp::{sigmoid, Dataset, MlpModel, CANONICAL_LAYERS};
pub use nn::{nn_membership, NnClassifier};
pub use train::{lm_dataset, lm_step, rprop_dataset, train, train_lm, train_rprop, Algorithm, TrainConfig, Trained};

use crate::surf::{Descriptor36, DESCRIPTOR_LEN};

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("class label must be 1..=3, got {0}")]
    InvalidLabel(u8),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("normal equations could not be solved even with damping {lambda:e}")]
    SolveFailed { lambda: f64 },
    #[error("jacobian needs {needed} bytes, over the {budget}-byte budget")]
    MemoryBudget { needed: usize, budget: usize },
    #[error("model input width {model} does not match descriptor width {expected}")]
    ShapeMismatch { model: usize, expected: usize },
}

/// Per-class membership values, index `m` holding class `m + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Membership3(pub [f64; NUM_CLASSES]);

impl Membership3 {
    pub const ZERO: Self = Self([0.0; NUM_CLASSES]);

    /// Largest component and its 1-based class; ties go to the lower class.
    pub fn best(&self) -> (u8, f64) {
        let mut cls = 0;
        for m in 1..NUM_CLASSES {
            if self.0[m] > self.0[cls] {
                cls = m;
            }
        }
        (cls as u8 + 1, self.0[cls])
    }

    pub fn clamped(self) -> Self {
        Self(self.0.map(|v| v.clamp(0.0, 1.0)))
    }
}

/// Unit target vector for a class label.
pub fn one_hot(label: u8) -> Result<Membership3, ClassifyError> {
    if !(1..=NUM_CLASSES as u8).contains(&label) {
        return Err(ClassifyError::InvalidLabel(label));
    }
    let mut m = [0.0; NUM_CLASSES];
    m[label as usize - 1] = 1.0;
    Ok(Membership3(m))
}

/// Either trained classifier behind one interface.
#[derive(Debug, Clone)]
pub enum Classifier {
    Nn(NnClassifier),
    Mlp(MlpModel),
}

impl Classifier {
    pub fn mlp(model: MlpModel) -> Result<Self, ClassifyError> {
        if model.input_dim() != DESCRIPTOR_LEN || model.output_dim() != NUM_CLASSES {
            return Err(ClassifyError::ShapeMismatch {
                model: model.input_dim(),
                expected: DESCRIPTOR_LEN,
            });
        }
        Ok(Self::Mlp(model))
    }

    /// Membership of one descriptor. Flat (zero) descriptors carry no
    /// texture and get zero membership from either classifier.
    pub fn membership(&self, d: &Descriptor36) -> Membership3 {
        if d.is_zero() {
            return Membership3::ZERO;
        }
        match self {
            Self::Nn(nn) => nn.membership(d),
            Self::Mlp(m) => m.forward(&d.0),
        }
    }

    pub fn classify(&self, features: &mut [crate::surf::Feature]) {
        for f in features {
            f.membership = Some(self.membership(&f.desc));
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nn(_) => "NN",
            Self::Mlp(_) => "MLP",
        }
    }
}
