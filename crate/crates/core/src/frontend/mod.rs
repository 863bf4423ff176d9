//! Dataset ingestion, stereo triangulation and landmark association.

mod csv;
mod registry;
mod stereo;

use thiserror::Error;

pub use csv::{
    format_groundtruth, format_imu, format_landmarks, format_tracks, parse_groundtruth_csv, parse_groundtruth_str,
    parse_imu_csv, parse_imu_str, parse_landmarks_csv, parse_landmarks_str, parse_tracks, parse_tracks_str, write_groundtruth_csv,
    write_imu_csv, write_landmarks_csv, write_tracks_csv, QUAT_NORM_TOLERANCE,
};
pub use registry::{register_landmarks, LandmarkRegistry, Registration};
pub use stereo::{
    body_point, format_calibration, load_calibration, parse_calibration_str, triangulate_stereo,
    CameraRig, MIN_DISPARITY,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t} is not after the previous row")]
    NonMonotonic { line: usize, t: i64 },
    #[error("line {line}: quaternion norm {norm} too far from 1")]
    QuaternionNorm { line: usize, norm: f64 },
    #[error("frame {t}: duplicate landmark ids {ids:?}")]
    DuplicateIds { t: i64, ids: Vec<u64> },
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("landmark {id}: disparity {disparity} below threshold")]
    Disparity { id: u64, disparity: f64 },
}

/// One matched stereo feature at time `t` (nanoseconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureObservation {
    pub t: i64,
    pub id: u64,
    pub u_l: f64,
    pub v_l: f64,
    pub u_r: f64,
    pub v_r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackFrame {
    pub t: i64,
    pub observations: Vec<FeatureObservation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackTable {
    pub frames: Vec<TrackFrame>,
}
