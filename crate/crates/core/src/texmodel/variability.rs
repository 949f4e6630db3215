use crate::classify::NUM_CLASSES;
use crate::surf::Feature;

use super::{TexModelError, TrainingSet};

/// Mean Euclidean descriptor distance over all `|x|·|y|` pairs.
///
/// When `x` and `y` are the same set the zero self-pairs are included in
/// the average. The result is bit-identical under swapping the arguments.
pub fn variability(x: &[Feature], y: &[Feature]) -> Result<f64, TexModelError> {
    if x.is_empty() || y.is_empty() {
        return Err(TexModelError::EmptySet);
    }
    // accumulate in one canonical orientation
    let (x, y) = if canonical_order(x, y) { (x, y) } else { (y, x) };
    let mut total = 0.0;
    for a in x {
        let mut row = 0.0;
        for b in y {
            row += a.desc.distance(&b.desc);
        }
        total += row;
    }
    Ok(total / (x.len() * y.len()) as f64)
}

/// Total order on feature sets (length, then descriptor bits).
fn canonical_order(x: &[Feature], y: &[Feature]) -> bool {
    let bits = |s: &[Feature]| {
        s.iter()
            .flat_map(|f| f.desc.0.iter().map(|v| v.to_bits()))
            .collect::<Vec<_>>()
    };
    match x.len().cmp(&y.len()) {
        std::cmp::Ordering::Equal => {}
        o => return o.is_lt(),
    }
    let first = |s: &[Feature]| s[0].desc.0.map(f64::to_bits);
    match first(x).cmp(&first(y)) {
        std::cmp::Ordering::Equal => bits(x) <= bits(y),
        o => o.is_lt(),
    }
}

/// Symmetric 3×3 table of [`variability`] between every pair of classes;
/// the diagonal holds the intraclass values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariabilityMatrix(pub [[f64; NUM_CLASSES]; NUM_CLASSES]);

impl VariabilityMatrix {
    pub fn get(&self, a: u8, b: u8) -> f64 {
        self.0[a as usize - 1][b as usize - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,grass,trees,road\n");
        for (i, name) in ["grass", "trees", "road"].iter().enumerate() {
            s.push_str(name);
            for j in 0..NUM_CLASSES {
                s.push_str(&format!(",{:.6}", self.0[i][j]));
            }
            s.push('\n');
        }
        s
    }
}

pub fn variability_matrix(ts: &TrainingSet) -> Result<VariabilityMatrix, TexModelError> {
    let classes: Vec<Vec<Feature>> = (1..=NUM_CLASSES as u8)
        .map(|l| ts.class(l).cloned().collect())
        .collect();
    for (i, c) in classes.iter().enumerate() {
        if c.is_empty() {
            return Err(TexModelError::EmptyClass(i as u8 + 1));
        }
    }
    let mut m = [[0.0; NUM_CLASSES]; NUM_CLASSES];
    for a in 0..NUM_CLASSES {
        for b in a..NUM_CLASSES {
            let v = variability(&classes[a], &classes[b])?;
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    Ok(VariabilityMatrix(m))
}
