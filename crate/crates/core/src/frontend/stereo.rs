use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{FeatureObservation, FrontendError};
use crate::quat::{rotmat_to_quat, RotationMatrix, UnitQuaternion};

/// Observations with disparity at or below this (pixels) are dropped.
pub const MIN_DISPARITY: f64 = 0.5;

/// Rectified stereo pair; the right camera sits `baseline` along the left
/// camera's +x axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub width: f64,
    pub height: f64,
    /// Body-from-camera rotation.
    pub q_bc: UnitQuaternion,
    /// Camera origin in the body frame.
    pub t_bc: Vector3<f64>,
}

impl CameraRig {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        baseline: f64,
        q_bc: UnitQuaternion,
        t_bc: Vector3<f64>,
    ) -> Result<Self, FrontendError> {
        let rig = Self {
            fx,
            fy,
            cx,
            cy,
            baseline,
            width: 2.0 * cx,
            height: 2.0 * cy,
            q_bc,
            t_bc,
        };
        rig.validate()?;
        Ok(rig)
    }

    fn validate(&self) -> Result<(), FrontendError> {
        let positive = [self.fx, self.fy, self.baseline, self.width, self.height];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && self.cx.is_finite() && self.cy.is_finite() {
            Ok(())
        } else {
            Err(FrontendError::Calibration(
                "fx, fy, baseline and image size must be positive".into(),
            ))
        }
    }

    /// EuRoC-like rig looking forward along body +x.
    pub fn forward_looking() -> Self {
        // Columns are the camera x (right), y (down), z (forward) axes in body coordinates.
        let r = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let q_bc = rotmat_to_quat(&RotationMatrix::new(r).expect("axis permutation is a rotation"));
        Self {
            fx: 458.0,
            fy: 458.0,
            cx: 376.0,
            cy: 240.0,
            baseline: 0.11,
            width: 752.0,
            height: 480.0,
            q_bc,
            t_bc: Vector3::zeros(),
        }
    }

    pub fn camera_to_body(&self, p_c: &Vector3<f64>) -> Vector3<f64> {
        self.q_bc.rotate(p_c) + self.t_bc
    }

    pub fn body_to_camera(&self, p_b: &Vector3<f64>) -> Vector3<f64> {
        self.q_bc.inverse_rotate(&(p_b - self.t_bc))
    }

    /// Pixel coordinates `(u_l, v_l, u_r, v_r)` of a camera-frame point, or
    /// `None` when it is behind the camera or outside either image.
    pub fn project(&self, p_c: &Vector3<f64>) -> Option<[f64; 4]> {
        if p_c.z <= 0.0 {
            return None;
        }
        let u_l = self.fx * p_c.x / p_c.z + self.cx;
        let v = self.fy * p_c.y / p_c.z + self.cy;
        let u_r = u_l - self.fx * self.baseline / p_c.z;
        let inside = |u: f64| (0.0..self.width).contains(&u);
        (inside(u_l) && inside(u_r) && (0.0..self.height).contains(&v)).then_some([u_l, v, u_r, v])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ExtrinsicsFile {
    /// Scalar-first.
    q: [f64; 4],
    t: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    baseline: f64,
    width: Option<f64>,
    height: Option<f64>,
    #[serde(rename = "T_bc")]
    t_bc: ExtrinsicsFile,
}

pub fn parse_calibration_str(text: &str) -> Result<CameraRig, FrontendError> {
    let f: CalibrationFile =
        toml::from_str(text).map_err(|e| FrontendError::Calibration(e.to_string()))?;
    let [w, x, y, z] = f.t_bc.q;
    let q = UnitQuaternion::new(w, x, y, z).map_err(|e| FrontendError::Calibration(e.to_string()))?;
    let mut rig = CameraRig::new(f.fx, f.fy, f.cx, f.cy, f.baseline, q, Vector3::from(f.t_bc.t))?;
    rig.width = f.width.unwrap_or(rig.width);
    rig.height = f.height.unwrap_or(rig.height);
    rig.validate()?;
    Ok(rig)
}

pub fn load_calibration(path: &Path) -> Result<CameraRig, FrontendError> {
    let text = fs::read_to_string(path).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_calibration_str(&text)
}

pub fn format_calibration(rig: &CameraRig) -> String {
    let q = rig.q_bc.coords();
    let f = CalibrationFile {
        fx: rig.fx,
        fy: rig.fy,
        cx: rig.cx,
        cy: rig.cy,
        baseline: rig.baseline,
        width: Some(rig.width),
        height: Some(rig.height),
        t_bc: ExtrinsicsFile {
            q: [q[0], q[1], q[2], q[3]],
            t: [rig.t_bc.x, rig.t_bc.y, rig.t_bc.z],
        },
    };
    toml::to_string(&f).expect("calibration serializes")
}

/// Camera-frame point from a rectified stereo observation.
pub fn triangulate_stereo(obs: &FeatureObservation, rig: &CameraRig) -> Result<Vector3<f64>, FrontendError> {
    let d = obs.u_l - obs.u_r;
    if !(d > MIN_DISPARITY) {
        return Err(FrontendError::Disparity { id: obs.id, disparity: d });
    }
    let z = rig.fx * rig.baseline / d;
    Ok(Vector3::new((obs.u_l - rig.cx) * z / rig.fx, (obs.v_l - rig.cy) * z / rig.fy, z))
}

/// Body-frame landmark coordinates `l_b`.
pub fn body_point(obs: &FeatureObservation, rig: &CameraRig) -> Result<Vector3<f64>, FrontendError> {
    Ok(rig.camera_to_body(&triangulate_stereo(obs, rig)?))
}
