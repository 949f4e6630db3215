//! One-sided Jacobi SVD for the small dense systems of two-view geometry.
//!
//! Column rotations keep full relative accuracy on rank-deficient and
//! nearly-degenerate-spectrum inputs such as essential matrices.

use nalgebra::{DMatrix, Matrix3, Vector3};

/// Singular values (descending), right singular vectors as columns of
/// `v`, and `a·v` whose columns are `σᵢ uᵢ`.
pub(crate) struct Svd {
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
    pub av: DMatrix<f64>,
}

pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for r in 0..m.nrows() {
                        let (xp, xq) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * xp - s * xq;
                        m[(r, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|i| u.column(i).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    Svd {
        s: order.iter().map(|&i| norms[i]).collect(),
        v: DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]),
        av: DMatrix::from_fn(u.nrows(), n, |r, c| u[(r, order[c])]),
    }
}

/// Full 3×3 SVD `m = U diag(s) Vᵀ` with orthonormal `U`, `V`; left vectors
/// of vanishing singular values are completed by cross products.
pub(crate) fn svd3(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let d = jacobi_svd(&DMatrix::from_column_slice(3, 3, m.as_slice()));
    let v = Matrix3::from_column_slice(d.v.as_slice());
    let tiny = 1e-13 * d.s[0].max(f64::MIN_POSITIVE);
    let col = |i: usize| Vector3::new(d.av[(0, i)], d.av[(1, i)], d.av[(2, i)]) / d.s[i];
    let u0 = if d.s[0] > tiny { col(0) } else { Vector3::x() };
    let u1 = if d.s[1] > tiny {
        col(1)
    } else {
        let seed = if u0.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        u0.cross(&seed).normalize()
    };
    let u2 = if d.s[2] > tiny { col(2) } else { u0.cross(&u1) };
    (
        Matrix3::from_columns(&[u0, u1, u2]),
        Vector3::new(d.s[0], d.s[1], d.s[2]),
        v,
    )
}

/// Unit vector spanning the (approximate) null space of `a`, and the
/// ratio of the two smallest singular values to the largest.
pub(crate) fn null_vector(a: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let d = jacobi_svd(a);
    let n = a.ncols();
    let x = d.v.column(n - 1).iter().copied().collect();
    (x, d.s)
}
