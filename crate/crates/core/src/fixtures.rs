//! Small labeled descriptor sets with known structure, for trainer checks
//! and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::surf::{Descriptor36, Feature, InterestPoint, DESCRIPTOR_LEN};
use crate::texmodel::TrainingSet;

fn labeled(d: [f64; DESCRIPTOR_LEN], label: u8) -> Feature {
    let mut f = Feature::new(
        InterestPoint {
            x: 0.0,
            y: 0.0,
            scale: 1.0,
            strength: 1.0,
            laplacian_positive: false,
        },
        Descriptor36(d),
    );
    f.label = label;
    f
}

/// Two-class XOR on the first two coordinates (±0.5 with jitter); the
/// other 34 are small noise. Class 2 when exactly one coordinate is
/// positive, class 1 otherwise.
pub fn embedded_xor(n: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feats = (0..n)
        .map(|_| {
            let a = rng.random_bool(0.5);
            let b = rng.random_bool(0.5);
            let mut d: [f64; DESCRIPTOR_LEN] = std::array::from_fn(|_| rng.random_range(-0.05..0.05));
            d[0] = if a { 0.5 } else { -0.5 } + rng.random_range(-0.05..0.05);
            d[1] = if b { 0.5 } else { -0.5 } + rng.random_range(-0.05..0.05);
            labeled(d, if a ^ b { 2 } else { 1 })
        })
        .collect();
    TrainingSet::new(feats)
}

/// Three classes split by the sign pattern of one coordinate: class 1
/// below −0.1, class 3 above 0.1, class 2 between. Coordinates are small
/// so a sigmoid network stays near its linear regime.
pub fn linear_separable(n: usize, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feats = (0..n)
        .map(|i| {
            let mut d: [f64; DESCRIPTOR_LEN] = std::array::from_fn(|_| rng.random_range(-0.02..0.02));
            let class = (i % 3) as u8 + 1;
            d[0] = match class {
                1 => rng.random_range(-0.3..-0.1),
                2 => rng.random_range(-0.05..0.05),
                _ => rng.random_range(0.1..0.3),
            };
            labeled(d, class)
        })
        .collect();
    TrainingSet::new(feats)
}
