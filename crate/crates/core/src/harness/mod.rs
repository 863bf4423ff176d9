//! Simulator, metrics and the experiment pipeline behind the `vinkit` CLI.

mod config;
mod io;
mod metrics;
mod pipeline;
mod sim;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    ExperimentConfig, InitConfig, LossConfig, Profile, SimConfig, CANONICAL_CONFIG,
};
pub use io::{
    format_estimates, load_dataset, parse_estimates_csv, parse_estimates_str, save_dataset, Dataset,
    ESTIMATE_HEADER,
};
pub use metrics::{compute_errors, compute_loss, ErrorSeries, LossReport};
pub use pipeline::{render_keypoints, run_filter, RunInputs, RunOptions, RunOutput};
pub use sim::{
    attach_biases, build_scenario, generate_landmarks, rng_for, simulate_trajectory, synthesize_imu,
    synthesize_tracks, Scenario, Stream, SyntheticImu, TruthSample,
};

use crate::dlam::{Dlam, DlamError, LoadOptions, StoreError, WeightStore};
use crate::frontend::{FrontendError, LandmarkRegistry};
use crate::nav::{NavError, NavState};
use crate::ukf::{FilterState, UkfError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Weights(#[from] StoreError),
    #[error(transparent)]
    Dlam(#[from] DlamError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] UkfError),
    #[error("error series has {len} samples, transient skip is {skip}")]
    SeriesTooShort { len: usize, skip: usize },
}

impl From<NavError> for HarnessError {
    fn from(e: NavError) -> Self {
        HarnessError::Numerical(UkfError::Nav(e))
    }
}

impl HarnessError {
    /// Process exit code: 2 for bad inputs, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub fn truth_pairs(truth: &[TruthSample]) -> Vec<(i64, NavState)> {
    truth.iter().map(|s| (s.t, s.state)).collect()
}

pub fn estimate_pairs(estimates: &[FilterState]) -> Vec<(i64, NavState)> {
    estimates.iter().map(|e| (e.t, e.x)).collect()
}

/// One synthetic run and its evaluation.
#[derive(Clone, Debug)]
pub struct SyntheticRun {
    pub scenario: Scenario,
    pub output: RunOutput,
    pub errors: ErrorSeries,
}

impl SyntheticRun {
    pub fn loss(&self, cfg: &LossConfig) -> Result<LossReport, HarnessError> {
        compute_loss(&self.errors, cfg.w_q, cfg.w_p, cfg.w_v, cfg.skip)
    }
}

/// Simulates `cfg.sim` and filters it from the true initial state.
pub fn run_synthetic(
    cfg: &ExperimentConfig,
    dlam: Option<&Dlam>,
    vision: bool,
) -> Result<SyntheticRun, HarnessError> {
    cfg.validate()?;
    let scenario = build_scenario(&cfg.sim, &cfg.gravity())?;
    run_on_scenario(cfg, scenario, dlam, vision)
}

pub fn run_on_scenario(
    cfg: &ExperimentConfig,
    scenario: Scenario,
    dlam: Option<&Dlam>,
    vision: bool,
) -> Result<SyntheticRun, HarnessError> {
    let nominal = cfg.nominal()?;
    let first = scenario.truth.first().ok_or_else(|| HarnessError::Data("empty trajectory".into()))?;
    let init = FilterState::new(first.state, cfg.init.covariance(), first.t);
    let output = run_filter(
        RunInputs {
            imu: &scenario.imu,
            tracks: &scenario.tracks,
            rig: &scenario.rig,
            init,
            registry: LandmarkRegistry::new(),
        },
        RunOptions {
            filter: &cfg.filter,
            nominal: &nominal,
            vision,
            dlam,
        },
    )?;
    let errors = compute_errors(
        &estimate_pairs(&output.estimates),
        &truth_pairs(&scenario.truth),
        cfg.sim.imu_period_ns() / 2,
    );
    Ok(SyntheticRun {
        scenario,
        output,
        errors,
    })
}

/// Inputs of one `vinkit run`.
#[derive(Clone, Debug, Default)]
pub struct ExperimentRequest {
    pub config: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub tracks: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub no_dlam: bool,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub loss: Option<LossReport>,
    pub estimates: usize,
    pub updates: usize,
    pub dlam: bool,
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => ExperimentConfig::from_toml(CANONICAL_CONFIG),
    }
}

pub fn load_dlam(path: &Path) -> Result<Dlam, HarnessError> {
    let store = WeightStore::load(path)?;
    Ok(Dlam::from_store(&store, LoadOptions::default())?)
}

/// Runs the filter on a dataset directory or, without one, on the
/// configured synthetic scenario; writes `estimates.csv`, `errors.csv` and
/// `loss.toml` into `req.out`. Artifacts produced before a numerical
/// failure are still written.
pub fn run_experiment(req: &ExperimentRequest) -> Result<ExperimentReport, HarnessError> {
    let mut cfg = load_config(req.config.as_deref())?;
    if let Some(seed) = req.seed {
        cfg.sim.seed = seed;
    }
    let dlam = match (&req.weights, req.no_dlam) {
        (Some(p), false) => Some(load_dlam(p)?),
        _ => None,
    };
    let nominal = cfg.nominal()?;

    let (output, truth, tolerance) = match &req.dataset {
        Some(dir) => {
            let data = load_dataset(dir, req.tracks.as_deref())?;
            let t_start = data
                .imu
                .first()
                .map(|u| u.t)
                .ok_or_else(|| HarnessError::Data("empty IMU file".into()))?;
            let (t0, x0) = *data
                .truth
                .iter()
                .find(|(t, _)| *t >= t_start)
                .ok_or_else(|| HarnessError::Data("no ground truth after the first IMU sample".into()))?;
            let registry = match data.landmarks.clone() {
                Some(lm) => LandmarkRegistry::known_map(lm),
                None => LandmarkRegistry::new(),
            };
            let period = data.imu.windows(2).map(|w| w[1].t - w[0].t).min().unwrap_or(0);
            let output = run_filter(
                RunInputs {
                    imu: &data.imu,
                    tracks: &data.tracks,
                    rig: &data.rig,
                    init: FilterState::new(x0, cfg.init.covariance(), t0),
                    registry,
                },
                RunOptions {
                    filter: &cfg.filter,
                    nominal: &nominal,
                    vision: true,
                    dlam: dlam.as_ref(),
                },
            )?;
            (output, data.truth, period / 2)
        }
        None => {
            let mut scenario = build_scenario(&cfg.sim, &cfg.gravity())?;
            if let Some(p) = &req.tracks {
                scenario.tracks = crate::frontend::parse_tracks(p)?;
            }
            let run = run_on_scenario(&cfg, scenario, dlam.as_ref(), true)?;
            (run.output, truth_pairs(&run.scenario.truth), cfg.sim.imu_period_ns() / 2)
        }
    };

    fs::create_dir_all(&req.out).map_err(|e| HarnessError::Io(format!("{}: {e}", req.out.display())))?;
    io::write_text(&req.out.join("estimates.csv"), &format_estimates(&output.estimates))?;
    let errors = compute_errors(&estimate_pairs(&output.estimates), &truth, tolerance);
    io::write_text(&req.out.join("errors.csv"), &errors.to_csv())?;
    let loss = compute_loss(&errors, cfg.loss.w_q, cfg.loss.w_p, cfg.loss.w_v, cfg.loss.skip).ok();
    if let Some(l) = &loss {
        let text = toml::to_string(l).map_err(|e| HarnessError::Io(e.to_string()))?;
        io::write_text(&req.out.join("loss.toml"), &text)?;
    }
    if let Some(e) = output.failure {
        return Err(HarnessError::Numerical(e));
    }
    Ok(ExperimentReport {
        loss,
        estimates: output.estimates.len(),
        updates: output.updates,
        dlam: dlam.is_some(),
    })
}

/// Loss of an estimate file against a ground-truth file.
pub fn evaluate_files(
    estimates: &Path,
    truth: &Path,
    cfg: &ExperimentConfig,
) -> Result<(ErrorSeries, LossReport), HarnessError> {
    let est = parse_estimates_csv(estimates)?;
    let truth = crate::frontend::parse_groundtruth_csv(truth)?;
    let errors = compute_errors(&est, &truth, cfg.sim.imu_period_ns() / 2);
    let loss = compute_loss(&errors, cfg.loss.w_q, cfg.loss.w_p, cfg.loss.w_v, cfg.loss.skip)?;
    Ok((errors, loss))
}

/// Writes the configured synthetic scenario as a dataset directory. The
/// true map goes to `landmarks_truth.csv`, so a later run registers
/// landmarks itself unless that file is renamed to `landmarks.csv`.
pub fn simulate_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<Scenario, HarnessError> {
    cfg.validate()?;
    let scenario = build_scenario(&cfg.sim, &cfg.gravity())?;
    save_dataset(
        out,
        &Dataset {
            imu: scenario.imu.clone(),
            truth: truth_pairs(&scenario.truth),
            tracks: scenario.tracks.clone(),
            rig: scenario.rig.clone(),
            landmarks: None,
        },
    )?;
    crate::frontend::write_landmarks_csv(&out.join("landmarks_truth.csv"), &scenario.landmarks)?;
    Ok(scenario)
}
