//! Browser bindings for a few vinkit operations. Everything crosses the
//! boundary as flat `f64` arrays or strings so the page needs no glue beyond
//! the generated module.

use wasm_bindgen::prelude::*;

use vinkit::dlam::{scale_sigma, GammaVector};
use vinkit::harness::{run_synthetic, ExperimentConfig};
use vinkit::nav::NoiseSigma;
use vinkit::quat::{quat_to_rotmat, rotvec_to_quat, RotationVector};

/// `[γ, c/c̄]` pairs for `n` logits evenly spaced over `[-range, range]`.
#[wasm_bindgen]
pub fn scaling_curve(upsilon: f64, range: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if !(upsilon > 0.0 && range > 0.0) || n < 2 {
        return Err(JsError::new("upsilon and range must be positive, n at least 2"));
    }
    let nominal = NoiseSigma::from_slice(&[1.0; 13]).map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let g = -range + 2.0 * range * k as f64 / (n - 1) as f64;
        let c = scale_sigma(&GammaVector::from_element(g), &nominal, upsilon);
        out.push(g);
        out.push(c.as_vector()[0]);
    }
    Ok(out)
}

/// Quaternion `[w x y z]` followed by the row-major rotation matrix.
#[wasm_bindgen]
pub fn rotvec_to_attitude(x: f64, y: f64, z: f64) -> Vec<f64> {
    let q = rotvec_to_quat(&RotationVector::new(x, y, z));
    let r = quat_to_rotmat(&q).into_inner();
    let mut out = q.coords().as_slice().to_vec();
    for i in 0..3 {
        for j in 0..3 {
            out.push(r[(i, j)]);
        }
    }
    out
}

/// Filtered synthetic run on the canonical scenario shortened to `duration`.
#[wasm_bindgen]
pub struct Trajectory {
    points: Vec<f64>,
    summary: String,
}

#[wasm_bindgen]
impl Trajectory {
    /// Per frame: `t, true px, py, pz, estimated px, py, pz`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

#[wasm_bindgen]
pub fn simulate(seed: u64, duration: f64, vision: bool) -> Result<Trajectory, JsError> {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.seed = seed;
    cfg.sim.duration = duration;
    let run = run_synthetic(&cfg, None, vision).map_err(|e| JsError::new(&e.to_string()))?;
    let mut points = Vec::with_capacity(7 * run.output.estimates.len());
    let mut truth = run.scenario.truth.iter().peekable();
    for e in &run.output.estimates {
        while truth.peek().is_some_and(|s| s.t < e.t) {
            truth.next();
        }
        let Some(s) = truth.peek() else { break };
        points.push(e.t as f64 * 1e-9);
        points.extend(s.state.p.iter());
        points.extend(e.x.p.iter());
    }
    let summary = match run.loss(&cfg.loss) {
        Ok(l) => format!(
            "{} frames, {} vision updates, position MSE {:.4} m^2, loss {:.3}",
            run.output.estimates.len(),
            run.output.updates,
            l.mse_p,
            l.loss
        ),
        Err(e) => e.to_string(),
    };
    Ok(Trajectory { points, summary })
}
