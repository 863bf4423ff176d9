//! Navigation state, IMU input, discrete kinematics and the landmark
//! measurement model.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3, Vector6};
use thiserror::Error;

use crate::quat::{boxplus, quat_diff, rotvec_to_quat, RotationVector, UnitQuaternion};

/// Serialized state length `[q p v b_ω b_a]`.
pub const STATE_DIM: usize = 16;
/// Error-state length (the quaternion contributes three degrees of freedom).
pub const ERROR_DIM: usize = 15;
/// IMU noise slot `[η_ω η_a]` carried in the augmented state.
pub const NOISE_DIM: usize = 6;
/// Serialized augmented state length.
pub const AUGMENTED_DIM: usize = STATE_DIM + NOISE_DIM;
/// Augmented error-state length.
pub const AUGMENTED_ERROR_DIM: usize = ERROR_DIM + NOISE_DIM;

/// Gravity in the world frame, z up.
pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

pub type Vector15 = SVector<f64, ERROR_DIM>;
pub type Vector16 = SVector<f64, STATE_DIM>;
pub type Matrix15 = SMatrix<f64, ERROR_DIM, ERROR_DIM>;
pub type Vector21 = SVector<f64, AUGMENTED_ERROR_DIM>;
pub type Matrix21 = SMatrix<f64, AUGMENTED_ERROR_DIM, AUGMENTED_ERROR_DIM>;
pub type Matrix6 = SMatrix<f64, NOISE_DIM, NOISE_DIM>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("noise sigma {index} must be positive and finite, got {value}")]
    NonPositiveSigma { index: usize, value: f64 },
    #[error("landmark set is empty")]
    EmptyLandmarks,
    #[error("measurement dimension {0} is not a positive multiple of 3")]
    BadMeasurementDim(usize),
    #[error("duplicate landmark id {0}")]
    DuplicateLandmark(u64),
    #[error("quaternion slot is not a unit quaternion: {0}")]
    BadQuaternion(#[from] crate::quat::QuatError),
}

/// Body-to-world attitude, world-frame position and velocity, IMU biases.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NavState {
    pub q: UnitQuaternion,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
}

impl NavState {
    /// `[qᵀ pᵀ vᵀ b_ωᵀ b_aᵀ]`.
    pub fn to_vector(&self) -> Vector16 {
        let mut x = Vector16::zeros();
        x.fixed_rows_mut::<4>(0).copy_from(&self.q.coords());
        x.fixed_rows_mut::<3>(4).copy_from(&self.p);
        x.fixed_rows_mut::<3>(7).copy_from(&self.v);
        x.fixed_rows_mut::<3>(10).copy_from(&self.gyro_bias);
        x.fixed_rows_mut::<3>(13).copy_from(&self.accel_bias);
        x
    }

    pub fn from_vector(x: &Vector16) -> Result<Self, NavError> {
        Ok(Self {
            q: UnitQuaternion::from_vector(&x.fixed_rows::<4>(0).into_owned())?,
            p: x.fixed_rows::<3>(4).into_owned(),
            v: x.fixed_rows::<3>(7).into_owned(),
            gyro_bias: x.fixed_rows::<3>(10).into_owned(),
            accel_bias: x.fixed_rows::<3>(13).into_owned(),
        })
    }

    /// The 12 non-quaternion entries `[p v b_ω b_a]`.
    pub fn vector_slots(&self) -> SVector<f64, 12> {
        let mut x = SVector::<f64, 12>::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.p);
        x.fixed_rows_mut::<3>(3).copy_from(&self.v);
        x.fixed_rows_mut::<3>(6).copy_from(&self.gyro_bias);
        x.fixed_rows_mut::<3>(9).copy_from(&self.accel_bias);
        x
    }

    pub fn with_vector_slots(q: UnitQuaternion, s: &SVector<f64, 12>) -> Self {
        Self {
            q,
            p: s.fixed_rows::<3>(0).into_owned(),
            v: s.fixed_rows::<3>(3).into_owned(),
            gyro_bias: s.fixed_rows::<3>(6).into_owned(),
            accel_bias: s.fixed_rows::<3>(9).into_owned(),
        }
    }

    /// Manifold addition of a 15-dim error vector `[δr δp δv δb_ω δb_a]`.
    pub fn boxplus(&self, delta: &Vector15) -> Self {
        let dr = RotationVector(delta.fixed_rows::<3>(0).into_owned());
        let slots = self.vector_slots() + delta.fixed_rows::<12>(3);
        Self::with_vector_slots(boxplus(&self.q, &dr), &slots)
    }

    /// Manifold difference `self ⊟ other` in the 15-dim error space.
    pub fn boxminus(&self, other: &Self) -> Vector15 {
        let mut d = Vector15::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&quat_diff(&self.q, &other.q).0);
        d.fixed_rows_mut::<12>(3)
            .copy_from(&(self.vector_slots() - other.vector_slots()));
        d
    }
}

/// Navigation state with the IMU noise realization slot `[η_ω η_a]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AugmentedState {
    pub x: NavState,
    pub noise: Vector6<f64>,
}

impl AugmentedState {
    pub fn to_vector(&self) -> SVector<f64, AUGMENTED_DIM> {
        let mut out = SVector::<f64, AUGMENTED_DIM>::zeros();
        out.fixed_rows_mut::<STATE_DIM>(0).copy_from(&self.x.to_vector());
        out.fixed_rows_mut::<NOISE_DIM>(STATE_DIM).copy_from(&self.noise);
        out
    }

    pub fn boxplus(&self, delta: &Vector21) -> Self {
        Self {
            x: self.x.boxplus(&delta.fixed_rows::<ERROR_DIM>(0).into_owned()),
            noise: self.noise + delta.fixed_rows::<NOISE_DIM>(ERROR_DIM),
        }
    }

    /// `x ⊟ δ`: quaternion via the inverse increment, vector slots subtract.
    pub fn boxminus_delta(&self, delta: &Vector21) -> Self {
        let dr = RotationVector(delta.fixed_rows::<3>(0).into_owned());
        let slots = self.x.vector_slots() - delta.fixed_rows::<12>(3);
        Self {
            x: NavState::with_vector_slots(crate::quat::boxminus_vec(&self.x.q, &dr), &slots),
            noise: self.noise - delta.fixed_rows::<NOISE_DIM>(ERROR_DIM),
        }
    }
}

/// One IMU reading: timestamp in nanoseconds, gyro (rad/s), accelerometer (m/s²).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ImuSample {
    pub t: i64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: i64, gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { t, gyro, accel }
    }

    /// `u = [ω_mᵀ a_mᵀ]`.
    pub fn input(&self) -> Vector6<f64> {
        Vector6::new(
            self.gyro.x,
            self.gyro.y,
            self.gyro.z,
            self.accel.x,
            self.accel.y,
            self.accel.z,
        )
    }
}

/// Standard deviations `[c_ηω(3) c_ηa(3) c_ηbω(3) c_ηba(3) c_ηl]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSigma(SVector<f64, 13>);

impl NoiseSigma {
    pub fn new(c: SVector<f64, 13>) -> Result<Self, NavError> {
        for (index, value) in c.iter().enumerate() {
            if !(*value > 0.0 && value.is_finite()) {
                return Err(NavError::NonPositiveSigma {
                    index,
                    value: *value,
                });
            }
        }
        Ok(Self(c))
    }

    pub fn from_slice(c: &[f64; 13]) -> Result<Self, NavError> {
        Self::new(SVector::from_column_slice(c))
    }

    /// Per-axis-isotropic convenience constructor.
    pub fn isotropic(
        gyro: f64,
        accel: f64,
        gyro_bias: f64,
        accel_bias: f64,
        landmark: f64,
    ) -> Result<Self, NavError> {
        let mut c = [0.0; 13];
        c[0..3].fill(gyro);
        c[3..6].fill(accel);
        c[6..9].fill(gyro_bias);
        c[9..12].fill(accel_bias);
        c[12] = landmark;
        Self::from_slice(&c)
    }

    pub fn as_vector(&self) -> &SVector<f64, 13> {
        &self.0
    }

    pub fn gyro(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn accel(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn gyro_bias(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(6).into_owned()
    }

    pub fn accel_bias(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(9).into_owned()
    }

    pub fn landmark(&self) -> f64 {
        self.0[12]
    }
}

/// World-frame landmark coordinates keyed (and ordered) by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LandmarkSet {
    points: BTreeMap<u64, Vector3<f64>>,
}

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, NavError>
    where
        I: IntoIterator<Item = (u64, Vector3<f64>)>,
    {
        let mut set = Self::new();
        for (id, l) in pairs {
            set.insert(id, l)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: u64, l_w: Vector3<f64>) -> Result<(), NavError> {
        if self.points.contains_key(&id) {
            return Err(NavError::DuplicateLandmark(id));
        }
        self.points.insert(id, l_w);
        Ok(())
    }

    pub fn get(&self, id: u64) -> Option<&Vector3<f64>> {
        self.points.get(&id)
    }

    pub fn contains(&self, id: u64) -> bool {
        self.points.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Measurement dimension `3·len`.
    pub fn measurement_dim(&self) -> usize {
        3 * self.points.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Vector3<f64>)> {
        self.points.iter().map(|(id, l)| (*id, l))
    }

    pub fn ids(&self) -> Vec<u64> {
        self.points.keys().copied().collect()
    }
}

/// Discrete transition `f(xᵃ, u)`: removes bias and the noise realization from
/// the IMU input and evaluates `exp(M^c dT)` in closed form with the input and
/// attitude held at the interval start. Biases are carried unchanged.
pub fn propagate_state(
    x: &NavState,
    u: &ImuSample,
    noise: &Vector6<f64>,
    dt: f64,
    gravity: &Vector3<f64>,
) -> Result<NavState, NavError> {
    if !(dt > 0.0) {
        return Err(NavError::NonPositiveStep(dt));
    }
    let omega = u.gyro - x.gyro_bias - noise.fixed_rows::<3>(0);
    let accel = u.accel - x.accel_bias - noise.fixed_rows::<3>(3);
    let world_accel = gravity + x.q.rotate(&accel);
    // ½Γ(ω)q is right-multiplication by [0, ω/2]; its exponential is q ⊗ q(ω dT).
    let q = x.q.compose(&rotvec_to_quat(&RotationVector(omega * dt)));
    Ok(NavState {
        q,
        p: x.p + x.v * dt + 0.5 * world_accel * dt * dt,
        v: x.v + world_accel * dt,
        gyro_bias: x.gyro_bias,
        accel_bias: x.accel_bias,
    })
}

/// `h_i(x, l_w) = R(q)ᵀ (l_w - p)`: the landmark in the body frame.
pub fn measure_landmark(x: &NavState, l_w: &Vector3<f64>) -> Vector3<f64> {
    x.q.inverse_rotate(&(l_w - x.p))
}

/// Stacked [`measure_landmark`] over the set, in id order.
pub fn measure_all(x: &NavState, landmarks: &LandmarkSet) -> Result<DVector<f64>, NavError> {
    if landmarks.is_empty() {
        return Err(NavError::EmptyLandmarks);
    }
    let rt = x.q.to_rotation_matrix().transpose().into_inner();
    let mut z = DVector::zeros(landmarks.measurement_dim());
    for (i, (_, l)) in landmarks.iter().enumerate() {
        z.fixed_rows_mut::<3>(3 * i).copy_from(&(rt * (l - x.p)));
    }
    Ok(z)
}

/// Process covariances derived from a sigma vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessNoise {
    /// Covariance of the augmented IMU noise slot `[η_ω η_a]`.
    pub imu: Matrix6,
    /// Additive error-space covariance: zero on attitude/position/velocity,
    /// bias random-walk variances on the trailing six entries.
    pub additive: Matrix15,
}

pub fn assemble_process_cov(c: &NoiseSigma) -> ProcessNoise {
    let s = c.as_vector();
    let mut imu = Matrix6::zeros();
    for i in 0..6 {
        imu[(i, i)] = s[i] * s[i];
    }
    let mut additive = Matrix15::zeros();
    for i in 0..6 {
        additive[(9 + i, 9 + i)] = s[6 + i] * s[6 + i];
    }
    ProcessNoise { imu, additive }
}

/// `c² I_{d_z}`.
pub fn assemble_measurement_cov(c_l: f64, dim: usize) -> Result<DMatrix<f64>, NavError> {
    if dim == 0 || !dim.is_multiple_of(3) {
        return Err(NavError::BadMeasurementDim(dim));
    }
    if !(c_l > 0.0 && c_l.is_finite()) {
        return Err(NavError::NonPositiveSigma {
            index: 12,
            value: c_l,
        });
    }
    Ok(DMatrix::identity(dim, dim) * (c_l * c_l))
}
