use nalgebra::{DMatrix, Matrix3, SVector};

use super::GammaVector;
use crate::nav::{assemble_measurement_cov, NoiseSigma};

/// `c_i = c̄_i · 10^{υ tanh γ_i}`.
pub fn scale_sigma(gamma: &GammaVector, nominal: &NoiseSigma, upsilon: f64) -> NoiseSigma {
    let c = SVector::<f64, 13>::from_fn(|i, _| {
        let factor = 10f64.powf(upsilon * gamma.0[i].tanh());
        nominal.as_vector()[i] * factor
    });
    NoiseSigma::new(c).expect("positive nominal times positive factor")
}

/// Diagonal noise covariances; `landmark` is `None` when no vision rows exist.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCovariances {
    pub gyro: Matrix3<f64>,
    pub accel: Matrix3<f64>,
    pub gyro_bias: Matrix3<f64>,
    pub accel_bias: Matrix3<f64>,
    pub landmark: Option<DMatrix<f64>>,
}

pub fn covariances_from_gamma(c: &NoiseSigma, dz: usize) -> NoiseCovariances {
    let diag = |v: nalgebra::Vector3<f64>| Matrix3::from_diagonal(&v.component_mul(&v));
    NoiseCovariances {
        gyro: diag(c.gyro()),
        accel: diag(c.accel()),
        gyro_bias: diag(c.gyro_bias()),
        accel_bias: diag(c.accel_bias()),
        landmark: if dz == 0 {
            None
        } else {
            assemble_measurement_cov(c.landmark(), dz).ok()
        },
    }
}
