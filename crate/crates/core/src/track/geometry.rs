//! Two-view geometry: fundamental matrix by the normalized eight-point
//! method, RANSAC, essential matrix, pose decomposition, triangulation.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Vector3, Vector4};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{null_vector, svd3};
use super::TrackError;

/// A point correspondence: pixel in the previous frame, pixel in the
/// current frame.
pub type Correspondence = ([f64; 2], [f64; 2]);

/// Pinhole intrinsics shared by both views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            cx: 128.0,
            cy: 128.0,
            skew: 0.0,
        }
    }
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || ![self.cx, self.cy, self.skew].iter().all(|v| v.is_finite()) {
            return Err(TrackError::InvalidParams("focal lengths must be positive".into()));
        }
        Ok(())
    }
}

/// Similarity taking points to zero mean and mean distance √2.
fn normalizer(pts: impl Iterator<Item = [f64; 2]> + Clone) -> Option<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (mx, my) = pts.clone().fold((0.0, 0.0), |a, p| (a.0 + p[0], a.1 + p[1]));
    let (mx, my) = (mx / n, my / n);
    let mean_d = pts.map(|p| ((p[0] - mx).powi(2) + (p[1] - my).powi(2)).sqrt()).sum::<f64>() / n;
    if !(mean_d > 1e-12) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_d;
    Some(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

/// Scales to unit Frobenius norm with a deterministic sign (largest
/// magnitude entry positive).
fn canonical_scale(m: Matrix3<f64>) -> Matrix3<f64> {
    let n = m.norm();
    let big = m.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    m / (n * big.signum())
}

/// Fundamental matrix with `m′ᵀ F m = 0`, `m` in the previous frame.
pub fn eight_point(corr: &[Correspondence]) -> Result<Matrix3<f64>, TrackError> {
    if corr.len() < 8 {
        return Err(TrackError::TooFewMatches { needed: 8, got: corr.len() });
    }
    let t1 = normalizer(corr.iter().map(|c| c.0)).ok_or(TrackError::Degenerate)?;
    let t2 = normalizer(corr.iter().map(|c| c.1)).ok_or(TrackError::Degenerate)?;
    let rows = corr.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in corr.iter().enumerate() {
        let [x, y] = apply(&t1, c.0);
        let [u, v] = apply(&t2, c.1);
        let row = [u * x, u * y, u, v * x, v * y, v, x, y, 1.0];
        for (k, val) in row.iter().enumerate() {
            a[(i, k)] = *val;
        }
    }
    let (f, s) = null_vector(&a);
    // a unique null vector needs rank 8
    if s[7] <= 1e-10 * s[0] {
        return Err(TrackError::Degenerate);
    }
    let f = Matrix3::from_row_slice(&f);
    let (u, sv, v) = svd3(&f);
    let f2 = u * Matrix3::from_diagonal(&Vector3::new(sv[0], sv[1], 0.0)) * v.transpose();
    Ok(canonical_scale(t2.transpose() * f2 * t1))
}

/// First-order geometric error of a correspondence under `f`, in pixels.
pub fn sampson_distance(f: &Matrix3<f64>, c: &Correspondence) -> f64 {
    let x = Vector3::new(c.0[0], c.0[1], 1.0);
    let xp = Vector3::new(c.1[0], c.1[1], 1.0);
    let fx = f * x;
    let ftxp = f.transpose() * xp;
    let e = xp.dot(&fx);
    let den = fx.x * fx.x + fx.y * fx.y + ftxp.x * ftxp.x + ftxp.y * ftxp.y;
    if den <= 0.0 {
        return if e == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (e * e / den).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier tolerance on the Sampson distance, pixels.
    pub tol: f64,
    pub confidence: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            tol: 1.0,
            confidence: 0.99,
            max_iters: 2000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RansacFit {
    pub f: Matrix3<f64>,
    /// Indices of inlier correspondences, ascending.
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

fn inliers_of(f: &Matrix3<f64>, corr: &[Correspondence], tol: f64) -> Vec<usize> {
    (0..corr.len()).filter(|&i| sampson_distance(f, &corr[i]) < tol).collect()
}

pub fn ransac_f(corr: &[Correspondence], params: &RansacParams) -> Result<RansacFit, TrackError> {
    if corr.len() < 8 {
        return Err(TrackError::TooFewMatches { needed: 8, got: corr.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Vec<usize> = Vec::new();
    let mut needed = params.max_iters;
    let mut iter = 0;
    while iter < needed.min(params.max_iters) {
        iter += 1;
        let idx = sample(&mut rng, corr.len(), 8);
        let minimal: Vec<Correspondence> = idx.iter().map(|i| corr[i]).collect();
        let Ok(f) = eight_point(&minimal) else { continue };
        let inl = inliers_of(&f, corr, params.tol);
        if inl.len() > best.len() {
            best = inl;
            let w = best.len() as f64 / corr.len() as f64;
            let miss = 1.0 - w.powi(8);
            needed = if miss <= 0.0 {
                0
            } else {
                ((1.0 - params.confidence).ln() / miss.ln()).ceil().max(1.0) as usize
            };
        }
    }
    if best.len() < 8 {
        return Err(TrackError::NoModel);
    }
    // refit on the consensus set until it stops changing
    let mut f = eight_point(&best.iter().map(|&i| corr[i]).collect::<Vec<_>>())?;
    for _ in 0..5 {
        let inl = inliers_of(&f, corr, params.tol);
        if inl == best || inl.len() < 8 {
            break;
        }
        best = inl;
        f = eight_point(&best.iter().map(|&i| corr[i]).collect::<Vec<_>>())?;
    }
    let inliers = inliers_of(&f, corr, params.tol);
    if inliers.len() < 8 {
        return Err(TrackError::NoModel);
    }
    Ok(RansacFit {
        f,
        inliers,
        iterations: iter,
    })
}

/// `E = Wᵀ F W` with a single intrinsic matrix for both views.
pub fn essential(f: &Matrix3<f64>, w: &Matrix3<f64>) -> Matrix3<f64> {
    w.transpose() * f * w
}

/// Projects onto the essential manifold: singular values `(s, s, 0)`.
pub fn balance(e: &Matrix3<f64>) -> Matrix3<f64> {
    let (u, s, v) = svd3(e);
    let m = 0.5 * (s[0] + s[1]);
    u * Matrix3::from_diagonal(&Vector3::new(m, m, 0.0)) * v.transpose()
}

pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// Result of triangulating one correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriPoint {
    pub point: Vector3<f64>,
    /// Homogeneous coordinate near 0 or an ambiguous (rank < 3) system,
    /// e.g. a point on the baseline.
    pub degenerate: bool,
}

/// Linear (DLT) triangulation with row-normalized equations.
pub fn triangulate(p1: &Matrix3x4<f64>, p2: &Matrix3x4<f64>, c: &Correspondence) -> TriPoint {
    let mut a = DMatrix::<f64>::zeros(4, 4);
    let eqs = [
        c.0[0] * p1.row(2) - p1.row(0),
        c.0[1] * p1.row(2) - p1.row(1),
        c.1[0] * p2.row(2) - p2.row(0),
        c.1[1] * p2.row(2) - p2.row(1),
    ];
    for (i, e) in eqs.iter().enumerate() {
        let n = e.norm();
        let e = if n > 0.0 { e / n } else { *e };
        for k in 0..4 {
            a[(i, k)] = e[k];
        }
    }
    let (x, s) = null_vector(&a);
    let x = Vector4::from_column_slice(&x);
    let ambiguous = s[2] <= 1e-9 * s[0];
    let at_infinity = x.w.abs() <= 1e-12 * x.xyz().norm();
    TriPoint {
        point: x.xyz() / x.w,
        degenerate: ambiguous || at_infinity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub uv: [f64; 2],
    /// The point lies behind the camera (negative depth).
    pub behind: bool,
}

pub fn project(p: &Matrix3x4<f64>, x: &Vector3<f64>) -> Result<Projection, TrackError> {
    let h = p * Vector4::new(x.x, x.y, x.z, 1.0);
    let scale = p.row(2).norm() * (x.norm() + 1.0);
    if h.z.abs() <= 1e-12 * scale {
        return Err(TrackError::AtInfinity);
    }
    Ok(Projection {
        uv: [h.x / h.z, h.y / h.z],
        behind: h.z < 0.0,
    })
}

/// `A[R|t]`.
pub fn ppm(a: &Matrix3<f64>, r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix3x4<f64> {
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    rt.set_column(3, t);
    a * rt
}

/// Depth of a point in the camera `[R|t]`.
fn depth(r: &Matrix3<f64>, t: &Vector3<f64>, x: &Vector3<f64>) -> f64 {
    (r * x + t).z
}

#[derive(Debug, Clone)]
pub struct Pose {
    pub r: Matrix3<f64>,
    /// Unit translation; the scale is not observable.
    pub t: Vector3<f64>,
    /// Correspondences in front of both cameras for the chosen candidate.
    pub in_front: usize,
}

/// Recovers `(R, t)` with `P = A[I|0]`, `P′ = A[R|t]` from an essential
/// matrix, choosing among the four candidates by cheirality on `corr`.
pub fn decompose(e: &Matrix3<f64>, a: &Matrix3<f64>, corr: &[Correspondence]) -> Result<Pose, TrackError> {
    let a_inv = a.try_inverse().ok_or(TrackError::InvalidParams("singular intrinsics".into()))?;
    let (mut u, _, v) = svd3(&balance(e));
    let mut vt = v.transpose();
    if u.determinant() < 0.0 {
        u = -u;
    }
    if vt.determinant() < 0.0 {
        vt = -vt;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t = u.column(2).into_owned();
    let candidates = [
        (u * w * vt, t),
        (u * w * vt, -t),
        (u * w.transpose() * vt, t),
        (u * w.transpose() * vt, -t),
    ];
    // cheirality in normalized coordinates
    let norm_corr: Vec<Correspondence> = corr.iter().map(|c| (apply(&a_inv, c.0), apply(&a_inv, c.1))).collect();
    let p1 = ppm(&Matrix3::identity(), &Matrix3::identity(), &Vector3::zeros());
    let counts: Vec<usize> = candidates
        .iter()
        .map(|(r, t)| {
            let p2 = ppm(&Matrix3::identity(), r, t);
            norm_corr
                .iter()
                .filter(|c| {
                    let x = triangulate(&p1, &p2, c);
                    !x.degenerate && x.point.z > 0.0 && depth(r, t, &x.point) > 0.0
                })
                .count()
        })
        .collect();
    let best = counts.iter().copied().max().unwrap_or(0);
    let winners: Vec<usize> = (0..4).filter(|&i| counts[i] == best).collect();
    if winners.len() != 1 || 2 * best <= corr.len() {
        return Err(TrackError::CheiralityTie);
    }
    let (r, t) = candidates[winners[0]];
    Ok(Pose {
        r,
        t: t.normalize(),
        in_front: best,
    })
}
