//! Stereo visual-inertial navigation with a quaternion unscented Kalman
//! filter and learned, bounded rescaling of its noise covariances.
//!
//! * [`quat`]: orientation algebra and manifold operators.
//! * [`nav`]: state, IMU input, discrete kinematics and landmark measurements.
//! * [`ukf`]: the sigma-point filter (aggregate predict + vision update).
//! * [`dlam`]: recurrent/convolutional networks producing covariance scalings.
//! * [`frontend`]: CSV ingestion, stereo triangulation and landmark registry.
//! * [`harness`]: simulator, error metrics, experiment pipeline.

pub mod dlam;
pub mod frontend;
pub mod harness;
pub mod nav;
pub mod quat;
pub mod ukf;
