//! Fully connected perceptron with logistic hidden layers and a linear
//! output layer.
//!
//! Weights are stored flat, layer after layer; each layer is an
//! `outputs × (inputs + 1)` row-major block whose last column is the bias.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Membership3, NUM_CLASSES};
use crate::surf::DESCRIPTOR_LEN;
use crate::texmodel::TrainingSet;

/// 36 inputs, hidden layers of 40 and 20, 3 outputs.
pub const CANONICAL_LAYERS: [usize; 4] = [DESCRIPTOR_LEN, 40, 20, NUM_CLASSES];

const MODEL_FORMAT: &str = "terraseg-mlp";
const MODEL_VERSION: u32 = 1;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inputs and one-hot targets, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dataset {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            input_dim,
            output_dim,
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) {
        assert_eq!(input.len(), self.input_dim);
        assert_eq!(target.len(), self.output_dim);
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn from_training(ts: &TrainingSet) -> Self {
        let mut ds = Self::new(DESCRIPTOR_LEN, NUM_CLASSES);
        for f in ts.features() {
            let t = super::one_hot(f.label).expect("training labels are 1..=3");
            ds.push(&f.desc.0, &t.0);
        }
        ds
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<usize>,
    weights: Vec<f64>,
}

/// Per-layer pre-activation outputs kept for backpropagation.
struct Trace {
    // activations[0] is the input; activations[l + 1] the output of layer l
    activations: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn weight_count_for(layers: &[usize]) -> usize {
        layers.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn zeros(layers: &[usize]) -> Self {
        assert!(layers.len() >= 2 && layers.iter().all(|&n| n > 0), "bad layer sizes");
        Self {
            layers: layers.to_vec(),
            weights: vec![0.0; Self::weight_count_for(layers)],
        }
    }

    /// Uniform initialization in `±1/√fan_in` per layer.
    pub fn random(layers: &[usize], rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(layers);
        let mut off = 0;
        for w in layers.windows(2) {
            let r = 1.0 / (w[0] as f64).sqrt();
            let n = (w[0] + 1) * w[1];
            for v in &mut m.weights[off..off + n] {
                *v = rng.random_range(-r..r);
            }
            off += n;
        }
        m
    }

    pub fn from_weights(layers: &[usize], weights: Vec<f64>) -> Result<Self, ClassifyError> {
        let expected = Self::weight_count_for(layers);
        if weights.len() != expected || layers.len() < 2 {
            return Err(ClassifyError::InvalidConfig(format!(
                "expected {expected} weights for layers {layers:?}, got {}",
                weights.len()
            )));
        }
        Ok(Self {
            layers: layers.to_vec(),
            weights,
        })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layers.last().unwrap()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        offs.push(0);
        for w in self.layers.windows(2) {
            off += (w[0] + 1) * w[1];
            offs.push(off);
        }
        offs
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let nl = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(nl + 1);
        activations.push(input.to_vec());
        let mut off = 0;
        for l in 0..nl {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let prev = &activations[l];
            let mut out = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let row = &self.weights[off + j * (n_in + 1)..off + (j + 1) * (n_in + 1)];
                let z = row[..n_in].iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + row[n_in];
                out.push(if l + 1 < nl { sigmoid(z) } else { z });
            }
            off += (n_in + 1) * n_out;
            activations.push(out);
        }
        Trace { activations }
    }

    /// Unclamped network output.
    pub fn forward_raw(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input width");
        self.trace(input).activations.pop().unwrap()
    }

    /// Membership values: the linear output clamped into `[0, 1]`.
    pub fn forward(&self, input: &[f64]) -> Membership3 {
        assert_eq!(self.output_dim(), NUM_CLASSES, "membership needs 3 outputs");
        let y = self.forward_raw(input);
        Membership3([y[0], y[1], y[2]]).clamped()
    }

    /// Sum of squared output errors over the dataset, on the unclamped
    /// output.
    pub fn loss(&self, ds: &Dataset) -> f64 {
        (0..ds.len())
            .map(|i| {
                self.forward_raw(ds.input(i))
                    .iter()
                    .zip(ds.target(i))
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Back-propagates `delta_out` (∂E/∂output) through a recorded trace,
    /// accumulating ∂E/∂w into `grad`.
    fn backprop(&self, trace: &Trace, delta_out: &[f64], offsets: &[usize], grad: &mut [f64]) {
        let nl = self.layers.len() - 1;
        let mut delta = delta_out.to_vec();
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let a_prev = &trace.activations[l];
            let off = offsets[l];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + j * (n_in + 1)..off + (j + 1) * (n_in + 1)];
                for (gk, a) in g[..n_in].iter_mut().zip(a_prev) {
                    *gk += d * a;
                }
                g[n_in] += d;
            }
            if l == 0 {
                break;
            }
            let mut next = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &self.weights[off + j * (n_in + 1)..off + j * (n_in + 1) + n_in];
                for (nk, w) in next.iter_mut().zip(row) {
                    *nk += w * d;
                }
            }
            // hidden activations are logistic: σ' = a(1 − a)
            for (nk, a) in next.iter_mut().zip(a_prev) {
                *nk *= a * (1.0 - a);
            }
            delta = next;
        }
    }

    /// Exact gradient of [`MlpModel::loss`].
    pub fn gradient(&self, ds: &Dataset) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let mut grad = vec![0.0; self.weights.len()];
        for i in 0..ds.len() {
            let tr = self.trace(ds.input(i));
            let y = tr.activations.last().unwrap();
            let delta: Vec<f64> = y.iter().zip(ds.target(i)).map(|(y, t)| 2.0 * (y - t)).collect();
            self.backprop(&tr, &delta, &offsets, &mut grad);
        }
        grad
    }

    /// Loss and gradient in a single pass.
    pub fn loss_and_gradient(&self, ds: &Dataset) -> (f64, Vec<f64>) {
        let offsets = self.layer_offsets();
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        for i in 0..ds.len() {
            let tr = self.trace(ds.input(i));
            let y = tr.activations.last().unwrap();
            let mut delta = Vec::with_capacity(y.len());
            for (y, t) in y.iter().zip(ds.target(i)) {
                loss += (y - t) * (y - t);
                delta.push(2.0 * (y - t));
            }
            self.backprop(&tr, &delta, &offsets, &mut grad);
        }
        (loss, grad)
    }

    /// Residuals `output − target` (length `N·outputs`) and the row-major
    /// Jacobian of the residuals with respect to the weights.
    pub fn residuals_and_jacobian(&self, ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let offsets = self.layer_offsets();
        let p = self.weights.len();
        let k_out = self.output_dim();
        let mut r = Vec::with_capacity(ds.len() * k_out);
        let mut jac = vec![0.0; ds.len() * k_out * p];
        let mut unit = vec![0.0; k_out];
        for i in 0..ds.len() {
            let tr = self.trace(ds.input(i));
            let y = tr.activations.last().unwrap();
            for k in 0..k_out {
                r.push(y[k] - ds.target(i)[k]);
                unit.iter_mut().for_each(|u| *u = 0.0);
                unit[k] = 1.0;
                let row = (i * k_out + k) * p;
                self.backprop(&tr, &unit, &offsets, &mut jac[row..row + p]);
            }
        }
        (r, jac)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            layers: self.layers.clone(),
            weights: self.weights.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifyError> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| ClassifyError::InvalidConfig(e.to_string()))?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(ClassifyError::InvalidConfig(format!(
                "unsupported model file {} v{}",
                f.format, f.version
            )));
        }
        Self::from_weights(&f.layers, f.weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    layers: Vec<usize>,
    weights: Vec<f64>,
}
