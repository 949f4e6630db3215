use nalgebra::{DMatrix, DVector};

use crate::surf::{Feature, DESCRIPTOR_LEN};

use super::TexModelError;

/// Projection of a feature set onto its two leading principal axes.
#[derive(Debug, Clone)]
pub struct Pca2 {
    pub coords: Vec<[f64; 2]>,
    /// Leading covariance eigenvalues, descending.
    pub eigenvalues: [f64; 2],
    /// Share of total variance captured by each axis.
    pub explained: [f64; 2],
}

impl Pca2 {
    /// `x,y,class` rows for external plotting.
    pub fn to_csv(&self, features: &[Feature]) -> String {
        let mut s = String::from("x,y,class\n");
        for (c, f) in self.coords.iter().zip(features) {
            s.push_str(&format!("{:.9},{:.9},{}\n", c[0], c[1], f.label));
        }
        s
    }
}

pub fn pca2(features: &[Feature]) -> Result<Pca2, TexModelError> {
    let n = features.len();
    if n < 3 {
        return Err(TexModelError::TooFewFeatures { needed: 3, got: n });
    }
    let mut mean = DVector::<f64>::zeros(DESCRIPTOR_LEN);
    for f in features {
        mean += DVector::from_column_slice(&f.desc.0);
    }
    mean /= n as f64;
    let centered = DMatrix::from_fn(n, DESCRIPTOR_LEN, |i, j| features[i].desc.0[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..DESCRIPTOR_LEN).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if total <= 1e-15 {
        return Err(TexModelError::Degenerate);
    }
    let axes = [eig.eigenvectors.column(order[0]), eig.eigenvectors.column(order[1])];
    let lambda = [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)];
    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            [row.dot(&axes[0].transpose()), row.dot(&axes[1].transpose())]
        })
        .collect();
    Ok(Pca2 {
        coords,
        eigenvalues: lambda,
        explained: [lambda[0] / total, lambda[1] / total],
    })
}
