//! Orientation algebra on SO(3) and the unit 3-sphere.
//!
//! Quaternions are scalar-first `[w, x, y, z]` and always kept in a canonical
//! hemisphere (`w >= 0`, ties broken by the first nonzero vector component
//! being positive), so `q` and `-q` never both appear as outputs.
//!
//! The manifold operators follow the left-perturbation convention:
//! `q ⊞ r = q(r) ⊗ q`, `q ⊟ r = q(r)⁻¹ ⊗ q` and `q1 ⊟ q2 = r(q1 ⊗ q2⁻¹)`.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use thiserror::Error;

/// Below this rotation angle the exp/log maps switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Within this distance of π the axis is read from the symmetric part of R.
const NEAR_PI: f64 = 1e-4;

const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("quaternion norm {0} is zero or not finite")]
    Degenerate(f64),
    #[error("matrix is not antisymmetric (|M + Mᵀ| = {0:e})")]
    NotAntisymmetric(f64),
    #[error("matrix is not a rotation (orthogonality error {orth:e}, det {det})")]
    NotRotation { orth: f64, det: f64 },
    #[error("weighted mean of an empty quaternion set")]
    EmptyMean,
    #[error("{quats} quaternions but {weights} weights")]
    LengthMismatch { quats: usize, weights: usize },
    #[error("eigen-decomposition of the weighted outer-product matrix failed")]
    EigenFailure,
}

/// Unit quaternion in scalar-first layout, canonical sign.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    v: Vector3<f64>,
}

impl fmt::Debug for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UnitQuaternion[{:.12}, {:.12}, {:.12}, {:.12}]",
            self.w, self.v.x, self.v.y, self.v.z
        )
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            w: 1.0,
            v: Vector3::zeros(),
        }
    }

    /// Normalizes and canonicalizes `[w, x, y, z]`.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, QuatError> {
        Self::from_vector(&Vector4::new(w, x, y, z))
    }

    /// Normalizes and canonicalizes a scalar-first 4-vector.
    pub fn from_vector(q: &Vector4<f64>) -> Result<Self, QuatError> {
        let n = q.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(QuatError::Degenerate(n));
        }
        Ok(Self::renormalized(q[0], Vector3::new(q[1], q[2], q[3])))
    }

    fn canonical(w: f64, v: Vector3<f64>) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        if flip {
            Self { w: -w, v: -v }
        } else {
            Self { w, v }
        }
    }

    /// Renormalizes a quaternion that drifted through floating-point error.
    fn renormalized(w: f64, v: Vector3<f64>) -> Self {
        let n2 = w * w + v.norm_squared();
        if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Self::canonical(w, v);
        }
        let n = n2.sqrt();
        Self::canonical(w / n, v / n)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn vector_part(&self) -> Vector3<f64> {
        self.v
    }

    /// Scalar-first coefficients `[w, x, y, z]`.
    pub fn coords(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.v.x, self.v.y, self.v.z)
    }

    pub fn norm(&self) -> f64 {
        self.coords().norm()
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let w = self.w * rhs.w - self.v.dot(&rhs.v);
        let v = self.w * rhs.v + rhs.w * self.v + self.v.cross(&rhs.v);
        Self::renormalized(w, v)
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.w, -self.v)
    }

    pub fn to_rotation_matrix(&self) -> RotationMatrix {
        RotationMatrix(quat_to_rotmat_raw(self.w, &self.v))
    }

    /// Rotates a vector from the body frame into the reference frame.
    pub fn rotate(&self, x: &Vector3<f64>) -> Vector3<f64> {
        quat_to_rotmat_raw(self.w, &self.v) * x
    }

    /// Applies the inverse rotation.
    pub fn inverse_rotate(&self, x: &Vector3<f64>) -> Vector3<f64> {
        quat_to_rotmat_raw(self.w, &self.v).transpose() * x
    }

    /// True when both represent the same rotation within `tol` (sign-agnostic).
    pub fn same_rotation(&self, other: &Self, tol: f64) -> bool {
        let a = self.coords();
        let b = other.coords();
        (a - b).amax() <= tol || (a + b).amax() <= tol
    }
}

fn quat_to_rotmat_raw(w: f64, v: &Vector3<f64>) -> Matrix3<f64> {
    (w * w - v.norm_squared()) * Matrix3::identity()
        + 2.0 * v * v.transpose()
        + 2.0 * w * so3_hat(v)
}

/// Angle-axis rotation vector `θ·u` (radians).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RotationVector(pub Vector3<f64>);

impl RotationVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zeros() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

impl From<Vector3<f64>> for RotationVector {
    fn from(v: Vector3<f64>) -> Self {
        Self(v)
    }
}

/// Element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub const TOLERANCE: f64 = 1e-9;

    /// Accepts `m` if `m mᵀ = I` and `det m = 1` within [`Self::TOLERANCE`].
    pub fn new(m: Matrix3<f64>) -> Result<Self, QuatError> {
        let orth = (m * m.transpose() - Matrix3::identity()).amax();
        let det = m.determinant();
        if orth > Self::TOLERANCE || (det - 1.0).abs() > Self::TOLERANCE || !det.is_finite() {
            return Err(QuatError::NotRotation { orth, det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// `[m]×`, the cross-product matrix.
pub fn so3_hat(m: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -m.z, m.y, m.z, 0.0, -m.x, -m.y, m.x, 0.0)
}

/// Inverse of [`so3_hat`]. Rejects inputs with `‖M + Mᵀ‖_F >= 1e-9`.
pub fn so3_vee(m: &Matrix3<f64>) -> Result<Vector3<f64>, QuatError> {
    let asym = (m + m.transpose()).norm();
    if !(asym < 1e-9) {
        return Err(QuatError::NotAntisymmetric(asym));
    }
    Ok(vex(m))
}

// vee of the antisymmetric part; no validation.
fn vex(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// `(M - Mᵀ) / 2`.
pub fn antisym_project(m: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m - m.transpose())
}

/// Rotation matrix to quaternion, branching on the largest of
/// `{tr R, R11, R22, R33}` so no branch divides by a small number.
pub fn rotmat_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    let m = &r.0;
    let trace = m.trace();
    let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let mut branch = 0;
    let mut best = trace;
    for (i, d) in diag.iter().enumerate() {
        if *d > best {
            best = *d;
            branch = i + 1;
        }
    }
    let (w, x, y, z) = match branch {
        0 => {
            let w = 0.5 * (1.0 + trace).sqrt();
            let k = 0.25 / w;
            (
                w,
                (m[(2, 1)] - m[(1, 2)]) * k,
                (m[(0, 2)] - m[(2, 0)]) * k,
                (m[(1, 0)] - m[(0, 1)]) * k,
            )
        }
        1 => {
            let x = 0.5 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            let k = 0.25 / x;
            (
                (m[(2, 1)] - m[(1, 2)]) * k,
                x,
                (m[(0, 1)] + m[(1, 0)]) * k,
                (m[(0, 2)] + m[(2, 0)]) * k,
            )
        }
        2 => {
            let y = 0.5 * (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt();
            let k = 0.25 / y;
            (
                (m[(0, 2)] - m[(2, 0)]) * k,
                (m[(0, 1)] + m[(1, 0)]) * k,
                y,
                (m[(1, 2)] + m[(2, 1)]) * k,
            )
        }
        _ => {
            let z = 0.5 * (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt();
            let k = 0.25 / z;
            (
                (m[(1, 0)] - m[(0, 1)]) * k,
                (m[(0, 2)] + m[(2, 0)]) * k,
                (m[(1, 2)] + m[(2, 1)]) * k,
                z,
            )
        }
    };
    UnitQuaternion::renormalized(w, Vector3::new(x, y, z))
}

pub fn quat_to_rotmat(q: &UnitQuaternion) -> RotationMatrix {
    q.to_rotation_matrix()
}

pub fn quat_compose(q1: &UnitQuaternion, q2: &UnitQuaternion) -> UnitQuaternion {
    q1.compose(q2)
}

pub fn quat_inverse(q: &UnitQuaternion) -> UnitQuaternion {
    q.inverse()
}

/// Angle in `[0, π]` and unit axis. The zero rotation reports axis `[1, 0, 0]`.
pub fn rotmat_to_axis_angle(r: &RotationMatrix) -> (f64, Vector3<f64>) {
    let m = &r.0;
    let s = vex(m);
    let sin_theta = s.norm();
    let cos_theta = 0.5 * (m.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if sin_theta == 0.0 && cos_theta > 0.0 {
        return (0.0, Vector3::x());
    }
    if std::f64::consts::PI - theta > NEAR_PI {
        return (theta, s / sin_theta);
    }

    // Near π: symmetric part is cosθ I + (1 - cosθ) u uᵀ.
    let sym = 0.5 * (m + m.transpose());
    let uu = (sym - cos_theta * Matrix3::identity()) / (1.0 - cos_theta);
    let mut pivot = 0;
    for i in 1..3 {
        if uu[(i, i)] > uu[(pivot, pivot)] {
            pivot = i;
        }
    }
    let mut axis = uu.column(pivot).into_owned() / uu[(pivot, pivot)].max(0.0).sqrt();
    axis /= axis.norm();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    (theta, axis)
}

/// Rodrigues formula for `exp([r]×)`.
pub fn rotvec_to_rotmat(r: &RotationVector) -> RotationMatrix {
    let theta2 = r.0.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = so3_hat(&r.0);
    RotationMatrix(Matrix3::identity() + a * k + b * k * k)
}

pub fn rotvec_to_quat(r: &RotationVector) -> UnitQuaternion {
    let theta2 = r.0.norm_squared();
    let theta = theta2.sqrt();
    let (w, k) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 8.0, 0.5 - theta2 / 48.0)
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    UnitQuaternion::renormalized(w, k * r.0)
}

/// Principal-branch logarithm, `‖r‖ <= π`.
pub fn quat_to_rotvec(q: &UnitQuaternion) -> RotationVector {
    // canonical sign guarantees w >= 0, hence θ in [0, π]
    let n = q.v.norm();
    let theta = 2.0 * n.atan2(q.w);
    if theta < SMALL_ANGLE {
        RotationVector(q.v * (2.0 / q.w) * (1.0 - n * n / (3.0 * q.w * q.w)))
    } else {
        RotationVector(q.v * (theta / n))
    }
}

/// `q ⊞ r = q(r) ⊗ q`.
pub fn boxplus(q: &UnitQuaternion, r: &RotationVector) -> UnitQuaternion {
    rotvec_to_quat(r).compose(q)
}

/// `q ⊟ r = q(r)⁻¹ ⊗ q`.
pub fn boxminus_vec(q: &UnitQuaternion, r: &RotationVector) -> UnitQuaternion {
    rotvec_to_quat(r).inverse().compose(q)
}

/// `q1 ⊟ q2 = r(q1 ⊗ q2⁻¹)`, so that `q2 ⊞ (q1 ⊟ q2) = q1`.
pub fn quat_diff(q1: &UnitQuaternion, q2: &UnitQuaternion) -> RotationVector {
    quat_to_rotvec(&q1.compose(&q2.inverse()))
}

/// Weighted quaternion mean: dominant eigenvector (largest |λ|) of
/// `E = Σ wᵢ qᵢ qᵢᵀ`. Ties resolve to the lowest eigen-index.
pub fn quat_weighted_mean(
    quats: &[UnitQuaternion],
    weights: &[f64],
) -> Result<UnitQuaternion, QuatError> {
    if quats.is_empty() {
        return Err(QuatError::EmptyMean);
    }
    if quats.len() != weights.len() {
        return Err(QuatError::LengthMismatch {
            quats: quats.len(),
            weights: weights.len(),
        });
    }
    let mut e = Matrix4::zeros();
    for (q, w) in quats.iter().zip(weights) {
        let c = q.coords();
        e += *w * c * c.transpose();
    }
    let (values, vectors) = jacobi_eigen4(&e).ok_or(QuatError::EigenFailure)?;
    let mut best = 0;
    for i in 1..4 {
        if values[i].abs() > values[best].abs() {
            best = i;
        }
    }
    UnitQuaternion::from_vector(&vectors.column(best).into_owned())
        .map_err(|_| QuatError::EigenFailure)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 4×4 matrix.
/// Returns eigenvalues and eigenvectors (as columns), unsorted.
pub fn jacobi_eigen4(m: &Matrix4<f64>) -> Option<(Vector4<f64>, Matrix4<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut a = 0.5 * (m + m.transpose());
    let mut v = Matrix4::identity();
    let scale = a.norm_squared();
    if scale == 0.0 {
        return Some((Vector4::zeros(), v));
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-32 * scale {
            return Some((a.diagonal(), v));
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..4 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    None
}
