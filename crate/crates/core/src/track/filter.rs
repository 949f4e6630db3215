//! Camera pose prediction: a constant-velocity Kalman filter on position
//! and an extended Kalman filter on orientation (unit quaternion plus
//! constant angular velocity).

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, SMatrix, SVector, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::geometry::ppm;

type Vector6 = SVector<f64, 6>;
type Matrix6 = SMatrix<f64, 6, 6>;
type Vector7 = SVector<f64, 7>;
type Matrix7 = SMatrix<f64, 7, 7>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Acceleration noise spectral density for position.
    pub q_pos: f64,
    /// Position measurement variance.
    pub r_pos: f64,
    /// Angular acceleration noise density.
    pub q_rot: f64,
    /// Quaternion measurement variance per component.
    pub r_rot: f64,
    /// Initial variance for unknown states.
    pub p0: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            q_pos: 1e-2,
            r_pos: 1e-2,
            q_rot: 1e-3,
            r_rot: 1e-3,
            p0: 1e3,
        }
    }
}

/// Quaternions are `[w, x, y, z]`.
pub fn quat_mul(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    left_matrix(a) * b
}

/// `L(a)` with `a ⊗ b = L(a) b`.
fn left_matrix(a: &Vector4<f64>) -> Matrix4<f64> {
    let [w, x, y, z] = [a[0], a[1], a[2], a[3]];
    Matrix4::new(w, -x, -y, -z, x, w, -z, y, y, z, w, -x, z, -y, x, w)
}

/// `R(b)` with `a ⊗ b = R(b) a`.
fn right_matrix(b: &Vector4<f64>) -> Matrix4<f64> {
    let [w, x, y, z] = [b[0], b[1], b[2], b[3]];
    Matrix4::new(w, -x, -y, -z, x, w, z, -y, y, -z, w, x, z, y, -x, w)
}

/// Rotation quaternion for a rotation vector `v` (axis × angle).
pub fn quat_exp(v: &Vector3<f64>) -> Vector4<f64> {
    let angle = v.norm();
    if angle < 1e-300 {
        return Vector4::new(1.0, 0.0, 0.0, 0.0);
    }
    let (s, c) = (angle / 2.0).sin_cos();
    let a = v / angle;
    Vector4::new(c, s * a.x, s * a.y, s * a.z)
}

pub fn quat_from_rotation(r: &Matrix3<f64>) -> Vector4<f64> {
    let q = UnitQuaternion::from_matrix(r);
    Vector4::new(q.w, q.i, q.j, q.k)
}

pub fn quat_to_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    *q.to_rotation_matrix().matrix()
}

/// Symmetrizes and clips negative eigenvalues to zero.
fn make_psd<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = DMatrix::from_column_slice(N, N, sym.as_slice()).symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    let r = SMatrix::<f64, N, N>::from_column_slice(r.as_slice());
    (r + r.transpose()) * 0.5
}

/// Pseudo-inverse that tolerates an exactly singular innovation
/// covariance (noise-free measurements).
fn pinv<const N: usize>(s: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    // absolute floor: covariances decaying toward subnormals are zero
    let tol = 1e-14 * s.abs().max() + 1e-150;
    let p = DMatrix::from_column_slice(N, N, s.as_slice())
        .pseudo_inverse(tol)
        .expect("non-negative tolerance");
    SMatrix::<f64, N, N>::from_column_slice(p.as_slice())
}

#[derive(Debug, Clone)]
pub struct PoseFilter {
    params: FilterParams,
    /// Camera centre and velocity.
    pos: Vector6,
    pos_cov: Matrix6,
    /// World-to-camera orientation quaternion and body angular velocity.
    ori: Vector7,
    ori_cov: Matrix7,
}

impl PoseFilter {
    /// Starts at a known pose with unknown velocities.
    pub fn new(params: FilterParams, centre: Vector3<f64>, r: &Matrix3<f64>) -> Self {
        Self::with_velocities(params, centre, Vector3::zeros(), r, Vector3::zeros(), false)
    }

    /// Starts from a fully known state. `certain` zeroes the initial
    /// covariance; otherwise velocities get variance `p0`.
    pub fn with_velocities(
        params: FilterParams,
        centre: Vector3<f64>,
        velocity: Vector3<f64>,
        r: &Matrix3<f64>,
        omega: Vector3<f64>,
        certain: bool,
    ) -> Self {
        let q = quat_from_rotation(r);
        let mut pos = Vector6::zeros();
        pos.fixed_rows_mut::<3>(0).copy_from(&centre);
        pos.fixed_rows_mut::<3>(3).copy_from(&velocity);
        let mut ori = Vector7::zeros();
        ori.fixed_rows_mut::<4>(0).copy_from(&q);
        ori.fixed_rows_mut::<3>(4).copy_from(&omega);
        let v = if certain { 0.0 } else { params.p0 };
        let mut pos_cov = Matrix6::zeros();
        let mut ori_cov = Matrix7::zeros();
        for i in 3..6 {
            pos_cov[(i, i)] = v;
        }
        for i in 4..7 {
            ori_cov[(i, i)] = v;
        }
        Self {
            params,
            pos,
            pos_cov,
            ori,
            ori_cov,
        }
    }

    pub fn centre(&self) -> Vector3<f64> {
        self.pos.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.pos.fixed_rows::<3>(3).into_owned()
    }

    pub fn quaternion(&self) -> Vector4<f64> {
        self.ori.fixed_rows::<4>(0).into_owned()
    }

    pub fn omega(&self) -> Vector3<f64> {
        self.ori.fixed_rows::<3>(4).into_owned()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        quat_to_rotation(&self.quaternion())
    }

    pub fn position_covariance(&self) -> &Matrix6 {
        &self.pos_cov
    }

    pub fn orientation_covariance(&self) -> &Matrix7 {
        &self.ori_cov
    }

    /// Projection matrix `A[R | −R c]` for the current state.
    pub fn ppm(&self, a: &Matrix3<f64>) -> Matrix3x4<f64> {
        let r = self.rotation();
        ppm(a, &r, &(-(r * self.centre())))
    }

    /// Advances both filters by `dt` and returns the predicted PPM.
    pub fn predict(&mut self, dt: f64, a: &Matrix3<f64>) -> Matrix3x4<f64> {
        assert!(dt > 0.0, "dt must be positive");
        self.predict_position(dt);
        self.predict_orientation(dt);
        self.ppm(a)
    }

    fn predict_position(&mut self, dt: f64) {
        let mut f = Matrix6::identity();
        for i in 0..3 {
            f[(i, i + 3)] = dt;
        }
        let q = self.params.q_pos;
        let mut qm = Matrix6::zeros();
        for i in 0..3 {
            qm[(i, i)] = q * dt.powi(3) / 3.0;
            qm[(i, i + 3)] = q * dt.powi(2) / 2.0;
            qm[(i + 3, i)] = q * dt.powi(2) / 2.0;
            qm[(i + 3, i + 3)] = q * dt;
        }
        self.pos = f * self.pos;
        self.pos_cov = make_psd(f * self.pos_cov * f.transpose() + qm);
    }

    fn predict_orientation(&mut self, dt: f64) {
        let q = self.quaternion();
        let w = self.omega();
        let dq = quat_exp(&(w * dt));
        let mut qn = quat_mul(&q, &dq);
        qn /= qn.norm();

        // linearized transition: ∂q′/∂q = R(δq), ∂q′/∂ω ≈ (dt/2) L(q)[0; I]
        let mut f = Matrix7::identity();
        f.fixed_view_mut::<4, 4>(0, 0).copy_from(&right_matrix(&dq));
        let l = left_matrix(&q);
        f.fixed_view_mut::<4, 3>(0, 4).copy_from(&(l.fixed_view::<4, 3>(0, 1) * (0.5 * dt)));
        let mut qm = Matrix7::zeros();
        for i in 4..7 {
            qm[(i, i)] = self.params.q_rot * dt;
        }
        self.ori.fixed_rows_mut::<4>(0).copy_from(&qn);
        self.ori_cov = make_psd(f * self.ori_cov * f.transpose() + qm);
    }

    pub fn update_position(&mut self, centre: &Vector3<f64>) {
        let mut h = SMatrix::<f64, 3, 6>::zeros();
        for i in 0..3 {
            h[(i, i)] = 1.0;
        }
        let r = Matrix3::identity() * self.params.r_pos;
        let s = h * self.pos_cov * h.transpose() + r;
        let k = self.pos_cov * h.transpose() * pinv(s);
        self.pos += k * (centre - h * self.pos);
        let ikh = Matrix6::identity() - k * h;
        self.pos_cov = make_psd(ikh * self.pos_cov * ikh.transpose() + k * r * k.transpose());
    }

    pub fn update_orientation(&mut self, r_meas: &Matrix3<f64>) {
        let q = self.quaternion();
        let mut z = quat_from_rotation(r_meas);
        if z.dot(&q) < 0.0 {
            z = -z;
        }
        let mut h = SMatrix::<f64, 4, 7>::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        let r = Matrix4::identity() * self.params.r_rot;
        let s = h * self.ori_cov * h.transpose() + r;
        let k = self.ori_cov * h.transpose() * pinv(s);
        self.ori += k * (z - q);
        let qn = self.quaternion().normalize();
        self.ori.fixed_rows_mut::<4>(0).copy_from(&qn);
        let ikh = Matrix7::identity() - k * h;
        self.ori_cov = make_psd(ikh * self.ori_cov * ikh.transpose() + k * r * k.transpose());
    }

    pub fn update(&mut self, centre: &Vector3<f64>, r: &Matrix3<f64>) {
        self.update_position(centre);
        self.update_orientation(r);
    }
}
