use nalgebra::{SVector, Vector3};

use super::linalg::{sqrt_psd, symmetrize};
use super::{FilterConfig, FilterState, UkfError, UtWeights, SIGMA_COUNT};
use crate::nav::{
    propagate_state, AugmentedState, ImuSample, Matrix15, Matrix21, Matrix6, NavState,
    ProcessNoise, Vector15, Vector21, AUGMENTED_ERROR_DIM, ERROR_DIM,
};
use crate::quat::{quat_weighted_mean, UnitQuaternion};

/// Sigma points over the augmented state (point 0 is the mean).
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSigmas {
    pub points: Vec<AugmentedState>,
}

/// Sigma points after the state transition (noise slot consumed).
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatedSigmas {
    pub points: Vec<NavState>,
}

/// `x̂ᵃ = [x̂, 0₆]`, `Pᵃ = blockdiag(P, C_ηx)`.
pub fn augment(fs: &FilterState, imu_cov: &Matrix6) -> (AugmentedState, Matrix21) {
    let mut pa = Matrix21::zeros();
    pa.fixed_view_mut::<ERROR_DIM, ERROR_DIM>(0, 0).copy_from(&fs.p);
    pa.fixed_view_mut::<6, 6>(ERROR_DIM, ERROR_DIM).copy_from(imu_cov);
    (
        AugmentedState {
            x: fs.x,
            noise: nalgebra::Vector6::zeros(),
        },
        pa,
    )
}

/// Symmetric sigma set around `xa` along the columns of `sqrt((21 + λ) Pᵃ)`.
pub fn draw_sigma_points(
    xa: &AugmentedState,
    pa: &Matrix21,
    cfg: &FilterConfig,
) -> Result<AugmentedSigmas, UkfError> {
    cfg.validate()?;
    let scale = AUGMENTED_ERROR_DIM as f64 + cfg.lambda;
    let root = sqrt_psd(&(pa * scale))?;
    let mut points = vec![*xa; SIGMA_COUNT];
    for col in 0..AUGMENTED_ERROR_DIM {
        let delta: Vector21 = root.column(col).into_owned();
        points[1 + col] = xa.boxplus(&delta);
        points[1 + AUGMENTED_ERROR_DIM + col] = xa.boxminus_delta(&delta);
    }
    Ok(AugmentedSigmas { points })
}

/// Each point through the transition using its own noise slot.
pub fn propagate_sigmas(
    sigmas: &AugmentedSigmas,
    u: &ImuSample,
    dt: f64,
    gravity: &Vector3<f64>,
) -> Result<PropagatedSigmas, UkfError> {
    let points = sigmas
        .points
        .iter()
        .map(|s| propagate_state(&s.x, u, &s.noise, dt, gravity))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PropagatedSigmas { points })
}

/// Weighted mean of the propagated points (quaternion via the weighted
/// quaternion mean) and the error-state covariance plus additive noise.
pub fn predict_moments(
    sigmas: &PropagatedSigmas,
    weights: &UtWeights,
    additive: &Matrix15,
) -> Result<(NavState, Matrix15), UkfError> {
    let mean = sigma_mean(&sigmas.points, &weights.mean)?;
    let mut p = *additive;
    for (point, w) in sigmas.points.iter().zip(weights.cov.iter()) {
        let r: Vector15 = point.boxminus(&mean);
        p += *w * r * r.transpose();
    }
    Ok((mean, symmetrize(&p)))
}

pub(crate) fn sigma_mean(points: &[NavState], weights: &[f64]) -> Result<NavState, UkfError> {
    let quats: Vec<UnitQuaternion> = points.iter().map(|s| s.q).collect();
    let q = quat_weighted_mean(&quats, weights)?;
    let mut slots = SVector::<f64, 12>::zeros();
    for (point, w) in points.iter().zip(weights) {
        slots += *w * point.vector_slots();
    }
    Ok(NavState::with_vector_slots(q, &slots))
}

/// Runs the predict cycle for every IMU sample in `batch`, integrating from
/// `fs.t` to `t_end`. Sample `j` is held over `[max(t_j, fs.t), t_{j+1})`
/// (the final one up to `t_end`); the first sample also covers any gap
/// before it. Intermediate priors become posteriors. `noise` holds either
/// one entry used for every sample or one entry per sample.
///
/// Returns the prior at `t_end` and the last propagated sigma set.
pub fn aggregate_predict(
    fs: &FilterState,
    batch: &[ImuSample],
    t_end: i64,
    noise: &[ProcessNoise],
    cfg: &FilterConfig,
    weights: &UtWeights,
) -> Result<(FilterState, PropagatedSigmas), UkfError> {
    if batch.is_empty() {
        return Err(UkfError::EmptyBatch);
    }
    if noise.len() != 1 && noise.len() != batch.len() {
        return Err(UkfError::NoiseCount {
            per_step: noise.len(),
            batch: batch.len(),
        });
    }
    for (i, pair) in batch.windows(2).enumerate() {
        if pair[1].t <= pair[0].t {
            return Err(UkfError::NonMonotonicBatch(i + 1));
        }
    }
    let gravity = cfg.gravity();
    let mut state = fs.clone();
    let mut last = None;
    for (j, sample) in batch.iter().enumerate() {
        let seg_end = batch.get(j + 1).map_or(t_end, |next| next.t.min(t_end));
        let seg_start = if j == 0 { fs.t } else { sample.t.max(fs.t) };
        if seg_end <= seg_start {
            continue;
        }
        let dt = (seg_end - seg_start) as f64 * 1e-9;
        let pn = if noise.len() == 1 { &noise[0] } else { &noise[j] };

        let (xa, pa) = augment(&state, &pn.imu);
        let drawn = draw_sigma_points(&xa, &pa, cfg)?;
        let propagated = propagate_sigmas(&drawn, sample, dt, &gravity)?;
        let (x, p) = predict_moments(&propagated, weights, &pn.additive)?;
        state = FilterState { x, p, t: seg_end };
        last = Some(propagated);
    }
    match last {
        Some(sigmas) => Ok((state, sigmas)),
        None => Err(UkfError::EmptyBatch),
    }
}
