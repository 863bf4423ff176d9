//! Quaternion-manifold unscented Kalman filter for visual-inertial navigation.
//!
//! The filter keeps a 16-entry state (unit quaternion, position, velocity and
//! two biases) with a 15×15 error-state covariance. Prediction runs over every
//! IMU sample received since the previous camera frame (the *aggregate
//! predict*), augmenting the state with the IMU noise slot at each sample; the
//! sigma points of the last prediction are reused for the vision update.

mod linalg;
mod predict;
mod update;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nav::{
    assemble_measurement_cov, assemble_process_cov, LandmarkSet, Matrix15, NavError, NavState,
    NoiseSigma, AUGMENTED_ERROR_DIM, GRAVITY,
};
use crate::quat::QuatError;

pub use linalg::{repair_psd, right_solve_spd, sqrt_psd, symmetrize, JITTER_ATTEMPTS, PSD_TOLERANCE};
pub use predict::{
    aggregate_predict, augment, draw_sigma_points, predict_moments, propagate_sigmas,
    AugmentedSigmas, PropagatedSigmas,
};
pub use update::{measurement_moments, update, MeasurementMoments};

/// Number of sigma points, `2(d_a - 1) + 1`.
pub const SIGMA_COUNT: usize = 2 * AUGMENTED_ERROR_DIM + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UkfError {
    #[error("invalid filter configuration: {0}")]
    Config(String),
    #[error("covariance square root failed after jitter escalation")]
    SquareRootFailed,
    #[error("innovation covariance could not be inverted")]
    InnovationSingular,
    #[error("covariance is not positive semi-definite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("non-finite value in filter covariance")]
    NotFinite,
    #[error("empty IMU batch")]
    EmptyBatch,
    #[error("IMU timestamps not increasing at sample {0}")]
    NonMonotonicBatch(usize),
    #[error("measurement length {got} does not match {expected} (3 per landmark)")]
    MeasurementDim { expected: usize, got: usize },
    #[error("{per_step} noise entries for a batch of {batch}")]
    NoiseCount { per_step: usize, batch: usize },
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

/// Unscented-transform and adaptation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Sigma-point spread.
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Bound on the learned log10 scaling of each noise sigma.
    pub upsilon: f64,
    pub gravity: [f64; 3],
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            lambda: 3.0,
            alpha: 1.0,
            beta: 2.0,
            upsilon: 1.0,
            gravity: [GRAVITY.x, GRAVITY.y, GRAVITY.z],
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), UkfError> {
        let n = AUGMENTED_ERROR_DIM as f64;
        if !(n + self.lambda > 0.0) {
            return Err(UkfError::Config(format!(
                "lambda must exceed -{n}, got {}",
                self.lambda
            )));
        }
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return Err(UkfError::Config(format!(
                "upsilon must be positive, got {}",
                self.upsilon
            )));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(UkfError::Config("alpha and beta must be finite".into()));
        }
        Ok(())
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }
}

/// Unscented-transform weights for the 43 sigma points.
#[derive(Clone, Debug, PartialEq)]
pub struct UtWeights {
    pub mean: [f64; SIGMA_COUNT],
    pub cov: [f64; SIGMA_COUNT],
}

pub fn ut_weights(cfg: &FilterConfig) -> Result<UtWeights, UkfError> {
    cfg.validate()?;
    let n = AUGMENTED_ERROR_DIM as f64;
    let lambda = cfg.lambda;
    let w0 = lambda / (lambda + n);
    let wi = 1.0 / (2.0 * (n + lambda));
    let mut mean = [wi; SIGMA_COUNT];
    let mut cov = [wi; SIGMA_COUNT];
    mean[0] = w0;
    cov[0] = w0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta;
    Ok(UtWeights { mean, cov })
}

/// Posterior (or prior) estimate with its error-state covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub x: NavState,
    pub p: Matrix15,
    /// Nanoseconds.
    pub t: i64,
}

impl FilterState {
    pub fn new(x: NavState, p: Matrix15, t: i64) -> Self {
        Self { x, p, t }
    }
}

/// Landmark observations for one camera frame: stacked body-frame
/// coordinates `z` against their registered world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct VisionFrame {
    pub z: DVector<f64>,
    pub landmarks: LandmarkSet,
}

/// Filter instance: configuration plus precomputed weights.
#[derive(Clone, Debug)]
pub struct Ukf {
    cfg: FilterConfig,
    weights: UtWeights,
}

impl Ukf {
    pub fn new(cfg: FilterConfig) -> Result<Self, UkfError> {
        let weights = ut_weights(&cfg)?;
        Ok(Self { cfg, weights })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &UtWeights {
        &self.weights
    }

    /// One filter cycle up to `t_end`: aggregate predict over `imu`, then a
    /// vision update when `frame` carries at least one landmark.
    pub fn step(
        &self,
        fs: &FilterState,
        imu: &[crate::nav::ImuSample],
        t_end: i64,
        frame: Option<&VisionFrame>,
        sigma: &NoiseSigma,
    ) -> Result<FilterState, UkfError> {
        let noise = assemble_process_cov(sigma);
        let (prior, sigmas) = aggregate_predict(
            fs,
            imu,
            t_end,
            std::slice::from_ref(&noise),
            &self.cfg,
            &self.weights,
        )?;
        match frame {
            Some(f) if !f.landmarks.is_empty() => {
                let c_l = assemble_measurement_cov(sigma.landmark(), f.landmarks.measurement_dim())?;
                update(&prior, &sigmas, &self.weights, &f.z, &f.landmarks, &c_l)
            }
            _ => Ok(prior),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_formula() {
        let w = ut_weights(&FilterConfig::default()).unwrap();
        assert_abs_diff_eq!(w.mean[0], 0.125, epsilon = 1e-16);
        assert_abs_diff_eq!(w.mean[1], 1.0 / 48.0, epsilon = 1e-16);
        assert_abs_diff_eq!(w.cov[0], 2.125, epsilon = 1e-15);
        for i in 1..SIGMA_COUNT {
            assert_eq!(w.mean[i], w.cov[i]);
        }
        assert_abs_diff_eq!(w.mean.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weights_sum_to_one_for_any_valid_lambda() {
        for lambda in [-20.5, -3.0, 0.0, 0.5, 3.0, 100.0] {
            let cfg = FilterConfig { lambda, ..Default::default() };
            let w = ut_weights(&cfg).unwrap();
            assert_abs_diff_eq!(w.mean.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_spread() {
        for lambda in [-21.0, -30.0, f64::NAN] {
            let cfg = FilterConfig { lambda, ..Default::default() };
            assert!(matches!(ut_weights(&cfg), Err(UkfError::Config(_))));
        }
        let cfg = FilterConfig { upsilon: 0.0, ..Default::default() };
        assert!(Ukf::new(cfg).is_err());
    }

    #[test]
    fn sigma_count_is_43() {
        assert_eq!(SIGMA_COUNT, 43);
    }
}
