use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::nav::{Matrix15, NoiseSigma};
use crate::ukf::FilterConfig;

/// Default experiment configuration shipped with the repository.
pub const CANONICAL_CONFIG: &str = include_str!("../../../../configs/canonical.toml");

/// Sinusoidal pose profile. Position axis `i` is
/// `offset_i + amp_i sin(2π freq_i t + phase_i)`; attitude is
/// yaw·pitch·roll with each angle `amp sin(2π freq t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub pos_offset: [f64; 3],
    pub pos_amp: [f64; 3],
    pub pos_freq: [f64; 3],
    pub pos_phase: [f64; 3],
    /// Roll, pitch, yaw amplitudes (rad).
    pub att_amp: [f64; 3],
    pub att_freq: [f64; 3],
    pub att_phase: [f64; 3],
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            pos_offset: [0.0, 0.0, 1.0],
            pos_amp: [1.0, 1.0, 0.3],
            pos_freq: [0.1, 0.1, 0.15],
            pos_phase: [0.0, std::f64::consts::FRAC_PI_2, 0.0],
            att_amp: [0.05, 0.05, 0.3],
            att_freq: [0.2, 0.15, 0.05],
            att_phase: [0.0, 0.5, 0.0],
        }
    }
}

impl Profile {
    pub fn stationary(at: [f64; 3]) -> Self {
        Self {
            pos_offset: at,
            pos_amp: [0.0; 3],
            att_amp: [0.0; 3],
            ..Self::default()
        }
    }
}

/// Simulated scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds.
    pub duration: f64,
    pub imu_rate: u32,
    pub cam_rate: u32,
    pub profile: Profile,
    /// True noise: gyro, accel (per sample), gyro/accel bias walk (per
    /// sample), and pixel noise in pixels as the 13th entry.
    pub true_sigma: [f64; 13],
    pub initial_gyro_bias: [f64; 3],
    pub initial_accel_bias: [f64; 3],
    pub landmark_count: usize,
    pub landmark_center: [f64; 3],
    /// Edge length of the landmark cube (m).
    pub landmark_extent: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            imu_rate: 200,
            cam_rate: 20,
            profile: Profile::default(),
            true_sigma: [
                2.4e-3, 2.4e-3, 2.4e-3, 2.8e-2, 2.8e-2, 2.8e-2, 1.3e-6, 1.3e-6, 1.3e-6, 2.1e-4,
                2.1e-4, 2.1e-4, 0.3,
            ],
            initial_gyro_bias: [2e-3, -1e-3, 1.5e-3],
            initial_accel_bias: [0.05, -0.03, 0.02],
            landmark_count: 100,
            landmark_center: [9.0, 0.0, 1.0],
            landmark_extent: 10.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.imu_rate == 0 || 1_000_000_000 % self.imu_rate != 0 {
            return bad(format!("imu_rate {} must divide 1e9 ns", self.imu_rate));
        }
        if self.cam_rate == 0 || !self.imu_rate.is_multiple_of(self.cam_rate) {
            return bad(format!(
                "imu_rate {} must be a multiple of cam_rate {}",
                self.imu_rate, self.cam_rate
            ));
        }
        if self.true_sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("true_sigma entries must be non-negative".into());
        }
        if !(self.landmark_extent >= 0.0) {
            return bad("landmark_extent must be non-negative".into());
        }
        Ok(())
    }

    pub fn imu_period_ns(&self) -> i64 {
        1_000_000_000 / self.imu_rate as i64
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.imu_rate as f64).round() as usize + 1
    }

    pub fn frame_stride(&self) -> usize {
        (self.imu_rate / self.cam_rate) as usize
    }
}

/// Initial covariance as per-block standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub attitude: f64,
    pub position: f64,
    pub velocity: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            attitude: 1e-3,
            position: 1e-3,
            velocity: 1e-2,
            gyro_bias: 5e-3,
            accel_bias: 0.1,
        }
    }
}

impl InitConfig {
    pub fn covariance(&self) -> Matrix15 {
        let mut p = Matrix15::zeros();
        let blocks = [
            self.attitude,
            self.position,
            self.velocity,
            self.gyro_bias,
            self.accel_bias,
        ];
        for (b, s) in blocks.iter().enumerate() {
            p.fixed_view_mut::<3, 3>(3 * b, 3 * b)
                .copy_from(&(Matrix3::identity() * (s * s)));
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub w_q: f64,
    pub w_p: f64,
    pub w_v: f64,
    pub skip: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w_q: 1000.0,
            w_p: 600.0,
            w_v: 100.0,
            skip: 50,
        }
    }
}

/// Everything one `vinkit run` needs besides the data itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub filter: FilterConfig,
    /// Nominal sigmas `c̄` used by the filter (13th entry in meters).
    pub nominal_sigma: [f64; 13],
    pub init: InitConfig,
    pub loss: LossConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            filter: FilterConfig::default(),
            nominal_sigma: [
                2.4e-3, 2.4e-3, 2.4e-3, 2.8e-2, 2.8e-2, 2.8e-2, 1.3e-6, 1.3e-6, 1.3e-6, 2.1e-4,
                2.1e-4, 2.1e-4, 0.3,
            ],
            init: InitConfig::default(),
            loss: LossConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.sim.validate()?;
        self.filter
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.nominal()?;
        Ok(())
    }

    pub fn nominal(&self) -> Result<NoiseSigma, HarnessError> {
        NoiseSigma::from_slice(&self.nominal_sigma).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.filter.gravity()
    }
}
