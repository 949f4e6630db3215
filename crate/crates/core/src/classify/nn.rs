use super::{ClassifyError, Membership3};
use crate::surf::Descriptor36;
use crate::texmodel::TrainingSet;

/// Instance-based classifier: the nearest training descriptor decides the
/// class, and its distance the strength `exp(−d²/τ²)`.
#[derive(Debug, Clone)]
pub struct NnClassifier {
    descs: Vec<Descriptor36>,
    labels: Vec<u8>,
    tau: f64,
}

impl NnClassifier {
    /// `tau = None` selects the median leave-one-out 1-NN distance of the
    /// training set. Flat (all-zero) training descriptors are ignored.
    pub fn new(ts: &TrainingSet, tau: Option<f64>) -> Result<Self, ClassifyError> {
        let (descs, labels): (Vec<_>, Vec<_>) = ts
            .features()
            .iter()
            .filter(|f| !f.desc.is_zero())
            .map(|f| (f.desc, f.label))
            .unzip();
        if descs.is_empty() {
            return Err(ClassifyError::EmptyTrainingSet);
        }
        let tau = match tau {
            Some(t) if t > 0.0 && t.is_finite() => t,
            Some(t) => return Err(ClassifyError::InvalidConfig(format!("bandwidth must be positive, got {t}"))),
            None => default_bandwidth(&descs),
        };
        Ok(Self { descs, labels, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.descs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descs.is_empty()
    }

    /// Nearest training index and its distance; ties go to the lower index.
    pub fn nearest(&self, d: &Descriptor36) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, t) in self.descs.iter().enumerate() {
            let d2 = d.distance_sq(t);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn membership(&self, d: &Descriptor36) -> Membership3 {
        if d.is_zero() {
            return Membership3::ZERO;
        }
        let (i, dist) = self.nearest(d);
        let mut m = [0.0; 3];
        m[self.labels[i] as usize - 1] = (-(dist * dist) / (self.tau * self.tau)).exp();
        Membership3(m)
    }
}

/// One-shot membership against a training set, as a free function.
pub fn nn_membership(d: &Descriptor36, ts: &TrainingSet, tau: f64) -> Result<Membership3, ClassifyError> {
    Ok(NnClassifier::new(ts, Some(tau))?.membership(d))
}

fn default_bandwidth(descs: &[Descriptor36]) -> f64 {
    if descs.len() < 2 {
        return 1.0;
    }
    let nn: Vec<f64> = descs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            descs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.distance_sq(b))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let median = crate::texmodel::quantile(&nn, 0.5);
    if median > 0.0 {
        return median;
    }
    // duplicates dominate: fall back to the typical positive spacing
    let positive: Vec<f64> = nn.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        crate::texmodel::quantile(&positive, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surf::{Feature, InterestPoint, DESCRIPTOR_LEN};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feature(d: [f64; DESCRIPTOR_LEN], label: u8) -> Feature {
        Feature {
            point: InterestPoint {
                x: 0.0,
                y: 0.0,
                scale: 1.0,
                strength: 1.0,
                laplacian_positive: false,
            },
            desc: Descriptor36(d),
            label,
            membership: None,
        }
    }

    fn random_ts(rng: &mut ChaCha8Rng, n: usize) -> TrainingSet {
        TrainingSet::new(
            (0..n)
                .map(|_| feature(std::array::from_fn(|_| rng.random::<f64>()), rng.random_range(1..=3)))
                .collect(),
        )
    }

    #[test]
    fn exact_hit_has_unit_strength() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = random_ts(&mut rng, 20);
        let f = ts.features().iter().find(|f| f.label == 2).unwrap();
        let m = nn_membership(&f.desc, &ts, 0.5).unwrap();
        assert_eq!(m.0, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn strength_decreases_with_distance() {
        let mut base = [0.0; DESCRIPTOR_LEN];
        base[0] = 1.0;
        let ts = TrainingSet::new(vec![feature(base, 3)]);
        let nn = NnClassifier::new(&ts, Some(0.7)).unwrap();
        let mut last = f64::INFINITY;
        for step in 0..10 {
            let mut q = base;
            q[1] = step as f64 * 0.1;
            let m = nn.membership(&Descriptor36(q));
            assert_eq!(m.best().0, 3);
            assert!(m.0[2] < last || step == 0);
            last = m.0[2];
        }
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ts = random_ts(&mut rng, 80);
        let nn = NnClassifier::new(&ts, None).unwrap();
        for _ in 0..50 {
            let q = Descriptor36(std::array::from_fn(|_| rng.random::<f64>()));
            let mut best = (0usize, f64::INFINITY);
            for (i, f) in ts.features().iter().enumerate() {
                let mut d2 = 0.0;
                for k in 0..DESCRIPTOR_LEN {
                    d2 += (q.0[k] - f.desc.0[k]).powi(2);
                }
                if d2 < best.1 {
                    best = (i, d2);
                }
            }
            let label = ts.features()[best.0].label;
            let strength = (-best.1 / (nn.tau() * nn.tau())).exp();
            let m = nn.membership(&q);
            assert_eq!(m.best().0, label);
            assert!((m.0[label as usize - 1] - strength).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_flat() {
        assert_eq!(
            NnClassifier::new(&TrainingSet::default(), None).unwrap_err(),
            ClassifyError::EmptyTrainingSet
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nn = NnClassifier::new(&random_ts(&mut rng, 5), None).unwrap();
        assert_eq!(nn.membership(&Descriptor36::zero()), Membership3::ZERO);
        assert!(nn.tau() > 0.0);
    }
}
