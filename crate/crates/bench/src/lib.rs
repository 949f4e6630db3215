//! Shared inputs for the benchmarks: one default-size mosaic and a model
//! trained on a few others.

use terraseg_core::classify::Classifier;
use terraseg_core::pipeline::{segment_image, train_model, training_set, Segmented};
use terraseg_core::synth::{mosaic_set, Mosaic, STREAM_TEST, STREAM_TRAIN};
use terraseg_core::track::Correspondence;
use terraseg_core::{ClassifierKind, Config, TrainingSet};

pub struct Inputs {
    pub cfg: Config,
    pub mosaic: Mosaic,
    pub training: TrainingSet,
    pub nn: Classifier,
    pub segmented: Segmented,
}

impl Inputs {
    pub fn new() -> Self {
        let cfg = Config::default();
        let train = mosaic_set(&cfg.mosaic, STREAM_TRAIN, 3).expect("default spec is valid");
        let mosaic = mosaic_set(&cfg.mosaic, STREAM_TEST, 1).expect("default spec is valid").remove(0);
        let training = training_set(&train, &cfg.detector).expect("mosaics have features");
        let nn = train_model(&training, &cfg, ClassifierKind::Nn).expect("three classes present").classifier;
        let segmented = segment_image(&mosaic.image, &nn, &cfg).expect("segmentation succeeds");
        Self {
            cfg,
            mosaic,
            training,
            nn,
            segmented,
        }
    }

    /// Correspondences of the mosaic's features with themselves shifted by a
    /// small projective warp, a fifth of them scrambled.
    pub fn correspondences(&self) -> Vec<Correspondence> {
        let n = self.segmented.features.len();
        self.segmented
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let (x, y) = f.position();
                let w = 1.0 + 1e-4 * x;
                let moved = [(x + 3.0 + 0.01 * y) / w, (y - 2.0) / w];
                if i % 5 == 0 {
                    let j = (i * 7 + 3) % n;
                    let (u, v) = self.segmented.features[j].position();
                    (f.position().into(), [u, v])
                } else {
                    ([x, y], moved)
                }
            })
            .collect()
    }
}

impl Default for Inputs {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_usable() {
        let inp = Inputs::new();
        assert!(inp.segmented.features.len() > 50);
        assert_eq!(inp.correspondences().len(), inp.segmented.features.len());
    }
}
