//! EuRoC-style CSV readers and writers.
//!
//! Lines starting with `#` and blank lines are skipped. Numbers may be
//! decimal or scientific. Writers print `f64` with Rust's shortest
//! round-trip formatting, so a write/parse cycle is exact.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Vector3, Vector4};

use super::{FeatureObservation, FrontendError, TrackFrame, TrackTable};
use crate::nav::{ImuSample, LandmarkSet, NavState};
use crate::quat::UnitQuaternion;

/// Ground-truth quaternions whose norm differs from 1 by more than this are
/// rejected instead of renormalized.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-3;

fn read(path: &Path) -> Result<String, FrontendError> {
    fs::read_to_string(path).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), FrontendError> {
    fs::write(path, text).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Data rows as `(line number, fields)`.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split(',').map(str::trim).collect()))
        }
    })
}

fn parse_time(line: usize, s: &str) -> Result<i64, FrontendError> {
    s.parse().map_err(|_| FrontendError::Parse {
        line,
        message: format!("bad timestamp {s:?}"),
    })
}

fn parse_f64(line: usize, s: &str) -> Result<f64, FrontendError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FrontendError::Parse {
            line,
            message: format!("bad number {s:?}"),
        }),
    }
}

fn expect_columns(line: usize, fields: &[&str], allowed: &[usize]) -> Result<(), FrontendError> {
    if allowed.contains(&fields.len()) {
        Ok(())
    } else {
        Err(FrontendError::Parse {
            line,
            message: format!("{} columns, expected {:?}", fields.len(), allowed),
        })
    }
}

fn vec3(line: usize, f: &[&str]) -> Result<Vector3<f64>, FrontendError> {
    Ok(Vector3::new(
        parse_f64(line, f[0])?,
        parse_f64(line, f[1])?,
        parse_f64(line, f[2])?,
    ))
}

/// Rows `t[ns],ωx,ωy,ωz,ax,ay,az` with strictly increasing `t`.
pub fn parse_imu_str(text: &str) -> Result<Vec<ImuSample>, FrontendError> {
    let mut out: Vec<ImuSample> = Vec::new();
    for (line, f) in rows(text) {
        expect_columns(line, &f, &[7])?;
        let t = parse_time(line, f[0])?;
        if out.last().is_some_and(|s| s.t >= t) {
            return Err(FrontendError::NonMonotonic { line, t });
        }
        out.push(ImuSample::new(t, vec3(line, &f[1..4])?, vec3(line, &f[4..7])?));
    }
    Ok(out)
}

pub fn parse_imu_csv(path: &Path) -> Result<Vec<ImuSample>, FrontendError> {
    parse_imu_str(&read(path)?)
}

/// Rows `t,px,py,pz,qw,qx,qy,qz,vx,vy,vz[,bwx,bwy,bwz,bax,bay,baz]`.
pub fn parse_groundtruth_str(text: &str) -> Result<Vec<(i64, NavState)>, FrontendError> {
    let mut out: Vec<(i64, NavState)> = Vec::new();
    for (line, f) in rows(text) {
        expect_columns(line, &f, &[11, 17])?;
        let t = parse_time(line, f[0])?;
        if out.last().is_some_and(|(prev, _)| *prev >= t) {
            return Err(FrontendError::NonMonotonic { line, t });
        }
        let p = vec3(line, &f[1..4])?;
        let q = Vector4::new(
            parse_f64(line, f[4])?,
            parse_f64(line, f[5])?,
            parse_f64(line, f[6])?,
            parse_f64(line, f[7])?,
        );
        let norm = q.norm();
        if (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(FrontendError::QuaternionNorm { line, norm });
        }
        let q = UnitQuaternion::from_vector(&q).map_err(|_| FrontendError::QuaternionNorm { line, norm })?;
        let v = vec3(line, &f[8..11])?;
        let (gyro_bias, accel_bias) = if f.len() == 17 {
            (vec3(line, &f[11..14])?, vec3(line, &f[14..17])?)
        } else {
            (Vector3::zeros(), Vector3::zeros())
        };
        out.push((
            t,
            NavState {
                q,
                p,
                v,
                gyro_bias,
                accel_bias,
            },
        ));
    }
    Ok(out)
}

pub fn parse_groundtruth_csv(path: &Path) -> Result<Vec<(i64, NavState)>, FrontendError> {
    parse_groundtruth_str(&read(path)?)
}

/// Rows `t[ns],id,u_l,v_l,u_r,v_r`, grouped into frames by timestamp.
/// Timestamps must be non-decreasing and `(t, id)` unique.
pub fn parse_tracks_str(text: &str) -> Result<TrackTable, FrontendError> {
    let mut frames: Vec<TrackFrame> = Vec::new();
    for (line, f) in rows(text) {
        expect_columns(line, &f, &[6])?;
        let t = parse_time(line, f[0])?;
        let id: u64 = f[1].parse().map_err(|_| FrontendError::Parse {
            line,
            message: format!("bad landmark id {:?}", f[1]),
        })?;
        let obs = FeatureObservation {
            t,
            id,
            u_l: parse_f64(line, f[2])?,
            v_l: parse_f64(line, f[3])?,
            u_r: parse_f64(line, f[4])?,
            v_r: parse_f64(line, f[5])?,
        };
        match frames.last_mut() {
            Some(fr) if fr.t == t => fr.observations.push(obs),
            Some(fr) if fr.t > t => return Err(FrontendError::NonMonotonic { line, t }),
            _ => frames.push(TrackFrame {
                t,
                observations: vec![obs],
            }),
        }
    }
    for fr in &frames {
        let mut seen = BTreeSet::new();
        let dup: BTreeSet<u64> = fr
            .observations
            .iter()
            .filter(|o| !seen.insert(o.id))
            .map(|o| o.id)
            .collect();
        if !dup.is_empty() {
            return Err(FrontendError::DuplicateIds {
                t: fr.t,
                ids: dup.into_iter().collect(),
            });
        }
    }
    Ok(TrackTable { frames })
}

pub fn parse_tracks(path: &Path) -> Result<TrackTable, FrontendError> {
    parse_tracks_str(&read(path)?)
}

pub fn format_imu(samples: &[ImuSample]) -> String {
    let mut s = String::from("#timestamp [ns],w_x [rad s^-1],w_y [rad s^-1],w_z [rad s^-1],a_x [m s^-2],a_y [m s^-2],a_z [m s^-2]\n");
    for u in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            u.t, u.gyro.x, u.gyro.y, u.gyro.z, u.accel.x, u.accel.y, u.accel.z
        );
    }
    s
}

pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<(), FrontendError> {
    write(path, &format_imu(samples))
}

/// Full 17-column rows including biases.
pub fn format_groundtruth(rows: &[(i64, NavState)]) -> String {
    let mut s = String::from("#timestamp,p_x,p_y,p_z,q_w,q_x,q_y,q_z,v_x,v_y,v_z,bw_x,bw_y,bw_z,ba_x,ba_y,ba_z\n");
    for (t, x) in rows {
        let q = x.q.coords();
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            x.p.x,
            x.p.y,
            x.p.z,
            q[0],
            q[1],
            q[2],
            q[3],
            x.v.x,
            x.v.y,
            x.v.z,
            x.gyro_bias.x,
            x.gyro_bias.y,
            x.gyro_bias.z,
            x.accel_bias.x,
            x.accel_bias.y,
            x.accel_bias.z
        );
    }
    s
}

pub fn write_groundtruth_csv(path: &Path, rows: &[(i64, NavState)]) -> Result<(), FrontendError> {
    write(path, &format_groundtruth(rows))
}

pub fn format_tracks(table: &TrackTable) -> String {
    let mut s = String::from("#timestamp [ns],id,u_l,v_l,u_r,v_r\n");
    for fr in &table.frames {
        for o in &fr.observations {
            let _ = writeln!(s, "{},{},{},{},{},{}", o.t, o.id, o.u_l, o.v_l, o.u_r, o.v_r);
        }
    }
    s
}

pub fn write_tracks_csv(path: &Path, table: &TrackTable) -> Result<(), FrontendError> {
    write(path, &format_tracks(table))
}

/// Rows `id,x,y,z` (world frame, meters) for known-map runs.
pub fn parse_landmarks_str(text: &str) -> Result<LandmarkSet, FrontendError> {
    let mut set = LandmarkSet::new();
    for (line, f) in rows(text) {
        expect_columns(line, &f, &[4])?;
        let id: u64 = f[0].parse().map_err(|_| FrontendError::Parse {
            line,
            message: format!("bad landmark id {:?}", f[0]),
        })?;
        set.insert(id, vec3(line, &f[1..4])?)
            .map_err(|_| FrontendError::DuplicateIds { t: 0, ids: vec![id] })?;
    }
    Ok(set)
}

pub fn parse_landmarks_csv(path: &Path) -> Result<LandmarkSet, FrontendError> {
    parse_landmarks_str(&read(path)?)
}

pub fn format_landmarks(set: &LandmarkSet) -> String {
    let mut s = String::from("#id,x,y,z\n");
    for (id, l) in set.iter() {
        let _ = writeln!(s, "{id},{},{},{}", l.x, l.y, l.z);
    }
    s
}

pub fn write_landmarks_csv(path: &Path, set: &LandmarkSet) -> Result<(), FrontendError> {
    write(path, &format_landmarks(set))
}
