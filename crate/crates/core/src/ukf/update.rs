use nalgebra::{DMatrix, DVector};

use super::linalg::{repair_psd, right_solve_spd, symmetrize};
use super::predict::PropagatedSigmas;
use super::{FilterState, UkfError, UtWeights};
use crate::nav::{measure_all, LandmarkSet, Matrix15, NavState, Vector15, ERROR_DIM};

/// Predicted measurement statistics from the propagated sigma points.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMoments {
    pub z_hat: DVector<f64>,
    pub pzz: DMatrix<f64>,
    /// Error-state/measurement cross covariance, 15 × d_z.
    pub pxz: DMatrix<f64>,
}

pub fn measurement_moments(
    sigmas: &PropagatedSigmas,
    mean: &NavState,
    weights: &UtWeights,
    landmarks: &LandmarkSet,
    c_l: &DMatrix<f64>,
) -> Result<MeasurementMoments, UkfError> {
    let zetas = sigmas
        .points
        .iter()
        .map(|x| measure_all(x, landmarks))
        .collect::<Result<Vec<_>, _>>()?;
    let dz = landmarks.measurement_dim();
    if c_l.nrows() != dz || c_l.ncols() != dz {
        return Err(UkfError::MeasurementDim {
            expected: dz,
            got: c_l.nrows(),
        });
    }

    let mut z_hat = DVector::zeros(dz);
    for (zeta, w) in zetas.iter().zip(weights.mean.iter()) {
        z_hat.axpy(*w, zeta, 1.0);
    }

    let mut pzz = c_l.clone();
    let mut pxz = DMatrix::zeros(ERROR_DIM, dz);
    for ((zeta, point), w) in zetas.iter().zip(&sigmas.points).zip(weights.cov.iter()) {
        let dzeta = zeta - &z_hat;
        let dx: Vector15 = point.boxminus(mean);
        pzz.ger(*w, &dzeta, &dzeta, 1.0);
        let dx_dyn = DVector::from_column_slice(dx.as_slice());
        pxz.ger(*w, &dx_dyn, &dzeta, 1.0);
    }
    let pzz = 0.5 * (&pzz + pzz.transpose());
    Ok(MeasurementMoments { z_hat, pzz, pxz })
}

/// Vision update: `K = P_xz P_zz⁻¹`, `x̂⁺ = x̂ ⊞ K(z - ẑ)`, `P⁺ = P - K P_zz Kᵀ`.
pub fn update(
    prior: &FilterState,
    sigmas: &PropagatedSigmas,
    weights: &UtWeights,
    z: &DVector<f64>,
    landmarks: &LandmarkSet,
    c_l: &DMatrix<f64>,
) -> Result<FilterState, UkfError> {
    let dz = landmarks.measurement_dim();
    if z.len() != dz {
        return Err(UkfError::MeasurementDim {
            expected: dz,
            got: z.len(),
        });
    }
    let m = measurement_moments(sigmas, &prior.x, weights, landmarks, c_l)?;
    let gain = right_solve_spd(&m.pxz, &m.pzz)?;
    let innovation = z - &m.z_hat;
    let correction = &gain * innovation;
    let delta = Vector15::from_column_slice(correction.as_slice());

    let reduction = &gain * &m.pzz * gain.transpose();
    let p = prior.p - Matrix15::from_column_slice(reduction.as_slice());
    let p = repair_psd(&symmetrize(&p))?;

    Ok(FilterState {
        x: prior.x.boxplus(&delta),
        p,
        t: prior.t,
    })
}
