//! Estimate CSVs and on-disk datasets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Vector3, Vector4};

use super::HarnessError;
use crate::frontend::{
    format_calibration, load_calibration, parse_groundtruth_csv, parse_imu_csv, parse_landmarks_csv,
    parse_tracks, write_groundtruth_csv, write_imu_csv, write_landmarks_csv, write_tracks_csv,
    CameraRig, TrackTable,
};
use crate::nav::{ImuSample, LandmarkSet, NavState};
use crate::quat::UnitQuaternion;
use crate::ukf::FilterState;

pub const ESTIMATE_HEADER: &str = "#t,qw,qx,qy,qz,px,py,pz,vx,vy,vz,bwx,bwy,bwz,bax,bay,baz";

pub fn format_estimates(estimates: &[FilterState]) -> String {
    let mut s = format!("{ESTIMATE_HEADER}\n");
    for e in estimates {
        let q = e.x.q.coords();
        let x = &e.x;
        let vals = [
            q[0], q[1], q[2], q[3], x.p.x, x.p.y, x.p.z, x.v.x, x.v.y, x.v.z, x.gyro_bias.x,
            x.gyro_bias.y, x.gyro_bias.z, x.accel_bias.x, x.accel_bias.y, x.accel_bias.z,
        ];
        let _ = write!(s, "{}", e.t);
        for v in vals {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_estimates_str(text: &str) -> Result<Vec<(i64, NavState)>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| HarnessError::Data(format!("estimates line {}: {m}", i + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 17 {
            return Err(err(&format!("{} columns, expected 17", f.len())));
        }
        let t: i64 = f[0].parse().map_err(|_| err("bad timestamp"))?;
        let v = f[1..]
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err("bad number"))?;
        let q = UnitQuaternion::from_vector(&Vector4::new(v[0], v[1], v[2], v[3]))
            .map_err(|_| err("degenerate quaternion"))?;
        let v3 = |k: usize| Vector3::new(v[k], v[k + 1], v[k + 2]);
        out.push((
            t,
            NavState {
                q,
                p: v3(4),
                v: v3(7),
                gyro_bias: v3(10),
                accel_bias: v3(13),
            },
        ));
    }
    Ok(out)
}

pub fn parse_estimates_csv(path: &Path) -> Result<Vec<(i64, NavState)>, HarnessError> {
    parse_estimates_str(&read_text(path)?)
}

pub(crate) fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// A dataset directory: `imu.csv`, `groundtruth.csv`, `tracks.csv`,
/// `calib.toml`, and optionally `landmarks.csv` (known-map mode).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub imu: Vec<ImuSample>,
    pub truth: Vec<(i64, NavState)>,
    pub tracks: TrackTable,
    pub rig: CameraRig,
    pub landmarks: Option<LandmarkSet>,
}

pub fn load_dataset(dir: &Path, tracks: Option<&Path>) -> Result<Dataset, HarnessError> {
    let tracks_path = tracks.map_or_else(|| dir.join("tracks.csv"), PathBuf::from);
    let lm_path = dir.join("landmarks.csv");
    Ok(Dataset {
        imu: parse_imu_csv(&dir.join("imu.csv"))?,
        truth: parse_groundtruth_csv(&dir.join("groundtruth.csv"))?,
        tracks: parse_tracks(&tracks_path)?,
        rig: load_calibration(&dir.join("calib.toml"))?,
        landmarks: if lm_path.exists() {
            Some(parse_landmarks_csv(&lm_path)?)
        } else {
            None
        },
    })
}

/// Writes a dataset directory readable by [`load_dataset`]. The landmark
/// file is only written when `landmarks` is given.
pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    write_imu_csv(&dir.join("imu.csv"), &data.imu)?;
    write_groundtruth_csv(&dir.join("groundtruth.csv"), &data.truth)?;
    write_tracks_csv(&dir.join("tracks.csv"), &data.tracks)?;
    write_text(&dir.join("calib.toml"), &format_calibration(&data.rig))?;
    if let Some(lm) = &data.landmarks {
        write_landmarks_csv(&dir.join("landmarks.csv"), lm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::Matrix15;
    use crate::quat::{rotvec_to_quat, RotationVector};

    #[test]
    fn estimates_round_trip() {
        let x = NavState {
            q: rotvec_to_quat(&RotationVector::new(0.3, -0.1, 2.0)),
            p: Vector3::new(1.0 / 3.0, 2.0, -7.5e-9),
            v: Vector3::new(0.1, 0.2, 0.3),
            gyro_bias: Vector3::new(1e-4, 0.0, -2e-4),
            accel_bias: Vector3::new(0.01, 0.02, -0.03),
        };
        let e = vec![FilterState::new(x, Matrix15::identity(), 123)];
        let back = parse_estimates_str(&format_estimates(&e)).unwrap();
        assert_eq!(back, vec![(123, x)]);
        assert!(parse_estimates_str("1,2,3\n").is_err());
    }
}
