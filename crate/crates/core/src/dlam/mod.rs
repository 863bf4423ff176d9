//! Learned noise adaptation.
//!
//! A bidirectional-GRU network over the last ten IMU samples emits twelve
//! logits (one per IMU and bias noise sigma); a stereo CNN emits a thirteenth
//! for the landmark noise. Each logit rescales its nominal sigma by
//! `10^{υ tanh γ}`, so the adapted value stays within one `υ`-decade band of
//! the nominal.

mod gru;
mod scaling;
mod store;
mod vision;

use nalgebra::SVector;
use thiserror::Error;

pub use gru::{
    bigru_layer, gru_cell, imunet_forward, imunet_param_count, GruDirection, GruLayer,
    ImuNetWeights, IMU_INPUT, IMU_OUTPUTS, IMU_WINDOW,
};
pub use scaling::{covariances_from_gamma, scale_sigma, NoiseCovariances};
pub use store::{
    canonical_layout, load_weights, LoadOptions, StoreError, StoreHeader, Tensor, WeightStore,
    FORMAT_VERSION, MAGIC,
};
pub use vision::{
    conv2d_forward, flat_features, maxpool2d, relu_in_place, stack_output_size,
    visionnet_forward, visionnet_param_count, Conv2d, EyeStack, FeatureMap, VisionNetWeights,
    CONV1_CHANNELS, CONV2_CHANNELS, HIDDEN as VISION_HIDDEN, KERNEL, POOL,
};

use crate::nav::{ImuSample, NoiseSigma};

/// Parameter count reported for the stereo network alongside the IMU
/// network's 27,276.
pub const PUBLISHED_VISION_PARAMS: usize = 2_901_089;
pub const CANONICAL_HIDDEN: usize = 32;
pub const CANONICAL_IMAGE: (usize, usize) = (752, 480);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DlamError {
    #[error("IMU window has {got} samples, expected {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error("image is {got:?}, network expects {expected:?}")]
    Resolution {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("layer output would be empty")]
    OutputTooSmall,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite network output")]
    NonFinite,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Scaling logits `γ₁…γ₁₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaVector(pub SVector<f64, 13>);

impl GammaVector {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn from_element(v: f64) -> Self {
        Self(SVector::from_element(v))
    }

    pub fn new(g: SVector<f64, 13>) -> Result<Self, DlamError> {
        if g.iter().all(|v| v.is_finite()) {
            Ok(Self(g))
        } else {
            Err(DlamError::NonFinite)
        }
    }
}

/// Both networks plus the scaling bound; immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Dlam {
    pub imu: ImuNetWeights,
    pub vision: VisionNetWeights,
    pub upsilon: f64,
}

impl Dlam {
    pub fn new(imu: ImuNetWeights, vision: VisionNetWeights, upsilon: f64) -> Result<Self, DlamError> {
        imu.check_shapes()?;
        if !(upsilon > 0.0 && upsilon.is_finite()) {
            return Err(DlamError::Shape(format!("upsilon must be positive, got {upsilon}")));
        }
        Ok(Self {
            imu,
            vision,
            upsilon,
        })
    }

    pub fn from_store(store: &WeightStore, opts: LoadOptions) -> Result<Self, DlamError> {
        let (imu, vision) = load_weights(store, opts)?;
        Self::new(imu, vision, store.header.upsilon as f64)
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.vision.width, self.vision.height)
    }

    pub fn param_count(&self) -> usize {
        self.imu.param_count() + self.vision.param_count()
    }

    /// Logits for one filter cycle. Without a stereo pair `γ₁₃ = 0`.
    pub fn gamma(
        &self,
        window: &[ImuSample],
        stereo: Option<(&FeatureMap, &FeatureMap)>,
    ) -> Result<GammaVector, DlamError> {
        let imu = imunet_forward(window, &self.imu)?;
        let vis = match stereo {
            Some((l, r)) => visionnet_forward(l, r, &self.vision)?,
            None => 0.0,
        };
        let mut g = SVector::<f64, 13>::zeros();
        for (i, v) in imu.iter().enumerate() {
            g[i] = *v as f64;
        }
        g[12] = vis as f64;
        GammaVector::new(g)
    }

    pub fn sigma(&self, gamma: &GammaVector, nominal: &NoiseSigma) -> NoiseSigma {
        scale_sigma(gamma, nominal, self.upsilon)
    }
}
