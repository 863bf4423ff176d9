//! Synthetic trajectories, IMU readings, landmarks and stereo tracks.

use std::f64::consts::TAU;

use nalgebra::{Vector3, Vector6};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rand::SeedableRng;

use super::config::{Profile, SimConfig};
use super::HarnessError;
use crate::frontend::{CameraRig, FeatureObservation, TrackFrame, TrackTable};
use crate::nav::{propagate_state, ImuSample, LandmarkSet, NavState};
use crate::quat::{quat_to_rotvec, rotvec_to_quat, RotationVector, UnitQuaternion};

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Imu = 1,
    Landmarks = 2,
    Tracks = 3,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn sines(t: f64, offset: &[f64; 3], amp: &[f64; 3], freq: &[f64; 3], phase: &[f64; 3]) -> Vector3<f64> {
    Vector3::from_fn(|i, _| offset[i] + amp[i] * (TAU * freq[i] * t + phase[i]).sin())
}

impl Profile {
    pub fn position(&self, t: f64) -> Vector3<f64> {
        sines(t, &self.pos_offset, &self.pos_amp, &self.pos_freq, &self.pos_phase)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let w = TAU * self.pos_freq[i];
            self.pos_amp[i] * w * (w * t + self.pos_phase[i]).cos()
        })
    }

    /// Yaw·pitch·roll attitude, body to world.
    pub fn attitude(&self, t: f64) -> UnitQuaternion {
        let a = sines(t, &[0.0; 3], &self.att_amp, &self.att_freq, &self.att_phase);
        let roll = rotvec_to_quat(&RotationVector::new(a[0], 0.0, 0.0));
        let pitch = rotvec_to_quat(&RotationVector::new(0.0, a[1], 0.0));
        let yaw = rotvec_to_quat(&RotationVector::new(0.0, 0.0, a[2]));
        yaw.compose(&pitch).compose(&roll)
    }
}

/// True state at an IMU tick together with the error-free inputs held over
/// the following interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSample {
    pub t: i64,
    pub state: NavState,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

/// Samples the profile at the IMU rate. Inputs are chosen per interval so
/// that the discrete transition reproduces the profile's attitude and
/// velocity at every tick; the states are the transition chain itself.
pub fn simulate_trajectory(cfg: &SimConfig, gravity: &Vector3<f64>) -> Result<Vec<TruthSample>, HarnessError> {
    cfg.validate()?;
    let period = cfg.imu_period_ns();
    let dt = period as f64 * 1e-9;
    let n = cfg.samples();
    let time = |k: usize| (k as i64 * period) as f64 * 1e-9;
    let prof = &cfg.profile;

    let mut x = NavState {
        q: prof.attitude(0.0),
        p: prof.position(0.0),
        v: prof.velocity(0.0),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (t0, t1) = (time(k), time(k + 1));
        let dq = x.q.inverse().compose(&prof.attitude(t1));
        let gyro = quat_to_rotvec(&dq).0 / dt;
        let world_accel = (prof.velocity(t1) - prof.velocity(t0)) / dt;
        let accel = x.q.inverse_rotate(&(world_accel - gravity));
        let t = k as i64 * period;
        out.push(TruthSample { t, state: x, gyro, accel });
        let u = ImuSample::new(t, gyro, accel);
        x = propagate_state(&x, &u, &Vector6::zeros(), dt, gravity)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticImu {
    pub samples: Vec<ImuSample>,
    pub gyro_bias: Vec<Vector3<f64>>,
    pub accel_bias: Vec<Vector3<f64>>,
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: &[f64]) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let z: f64 = StandardNormal.sample(rng);
        sigma[i] * z
    })
}

/// `ω_m = ω + b_ω + η_ω`, `a_m = a + b_a + η_a`, biases random-walking
/// once per sample. `sigma` uses the first twelve entries of the
/// 13-vector layout.
pub fn synthesize_imu<R: Rng + ?Sized>(
    truth: &[TruthSample],
    sigma: &[f64; 13],
    gyro_bias0: Vector3<f64>,
    accel_bias0: Vector3<f64>,
    rng: &mut R,
) -> SyntheticImu {
    let mut bg = gyro_bias0;
    let mut ba = accel_bias0;
    let mut out = SyntheticImu {
        samples: Vec::with_capacity(truth.len()),
        gyro_bias: Vec::with_capacity(truth.len()),
        accel_bias: Vec::with_capacity(truth.len()),
    };
    for s in truth {
        let eta_w = gaussian3(rng, &sigma[0..3]);
        let eta_a = gaussian3(rng, &sigma[3..6]);
        out.samples.push(ImuSample::new(s.t, s.gyro + bg + eta_w, s.accel + ba + eta_a));
        out.gyro_bias.push(bg);
        out.accel_bias.push(ba);
        bg += gaussian3(rng, &sigma[6..9]);
        ba += gaussian3(rng, &sigma[9..12]);
    }
    out
}

/// Copies the bias trajectories into the truth states.
pub fn attach_biases(truth: &mut [TruthSample], imu: &SyntheticImu) {
    for ((s, bg), ba) in truth.iter_mut().zip(&imu.gyro_bias).zip(&imu.accel_bias) {
        s.state.gyro_bias = *bg;
        s.state.accel_bias = *ba;
    }
}

/// `count` landmarks uniform in an axis-aligned cube, ids `0..count`.
pub fn generate_landmarks<R: Rng + ?Sized>(
    count: usize,
    center: Vector3<f64>,
    extent: f64,
    rng: &mut R,
) -> LandmarkSet {
    let half = 0.5 * extent;
    let mut set = LandmarkSet::new();
    for id in 0..count {
        let offset = Vector3::from_fn(|_, _| if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 });
        set.insert(id as u64, center + offset).expect("ids are unique");
    }
    set
}

/// Projects visible landmarks at every `stride`-th truth sample, with
/// independent pixel noise on all four coordinates.
pub fn synthesize_tracks<R: Rng + ?Sized>(
    truth: &[TruthSample],
    landmarks: &LandmarkSet,
    rig: &CameraRig,
    pixel_sigma: f64,
    stride: usize,
    rng: &mut R,
) -> TrackTable {
    let noise = Normal::new(0.0, pixel_sigma.max(0.0)).expect("finite sigma");
    let mut frames = Vec::new();
    for s in truth.iter().step_by(stride.max(1)) {
        let mut observations = Vec::new();
        for (id, l_w) in landmarks.iter() {
            let l_b = s.state.q.inverse_rotate(&(l_w - s.state.p));
            let Some([u_l, v_l, u_r, v_r]) = rig.project(&rig.body_to_camera(&l_b)) else {
                continue;
            };
            let mut px = || if pixel_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            observations.push(FeatureObservation {
                t: s.t,
                id,
                u_l: u_l + px(),
                v_l: v_l + px(),
                u_r: u_r + px(),
                v_r: v_r + px(),
            });
        }
        frames.push(TrackFrame { t: s.t, observations });
    }
    TrackTable { frames }
}

/// All synthetic inputs for one seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub truth: Vec<TruthSample>,
    pub imu: Vec<ImuSample>,
    pub tracks: TrackTable,
    pub landmarks: LandmarkSet,
    pub rig: CameraRig,
}

pub fn build_scenario(cfg: &SimConfig, gravity: &Vector3<f64>) -> Result<Scenario, HarnessError> {
    let mut truth = simulate_trajectory(cfg, gravity)?;
    let imu = synthesize_imu(
        &truth,
        &cfg.true_sigma,
        Vector3::from(cfg.initial_gyro_bias),
        Vector3::from(cfg.initial_accel_bias),
        &mut rng_for(cfg.seed, Stream::Imu),
    );
    attach_biases(&mut truth, &imu);
    let landmarks = generate_landmarks(
        cfg.landmark_count,
        Vector3::from(cfg.landmark_center),
        cfg.landmark_extent,
        &mut rng_for(cfg.seed, Stream::Landmarks),
    );
    let rig = CameraRig::forward_looking();
    let tracks = synthesize_tracks(
        &truth,
        &landmarks,
        &rig,
        cfg.true_sigma[12],
        cfg.frame_stride(),
        &mut rng_for(cfg.seed, Stream::Tracks),
    );
    Ok(Scenario {
        truth,
        imu: imu.samples,
        tracks,
        landmarks,
        rig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::GRAVITY;
    use approx::assert_abs_diff_eq;

    fn short(profile: Profile) -> SimConfig {
        SimConfig {
            duration: 2.0,
            profile,
            ..SimConfig::default()
        }
    }

    #[test]
    fn hover_profile() {
        let truth = simulate_trajectory(&short(Profile::stationary([0.0, 0.0, 1.0])), &GRAVITY).unwrap();
        assert_eq!(truth.len(), 401);
        for s in &truth {
            assert_eq!(s.gyro, Vector3::zeros());
            assert_abs_diff_eq!(s.accel, Vector3::new(0.0, 0.0, 9.81), epsilon = 1e-12);
            assert_abs_diff_eq!(s.state.p, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_has_constant_speed() {
        let (a, f) = (2.0, 0.25);
        let profile = Profile {
            pos_offset: [0.0; 3],
            pos_amp: [a, a, 0.0],
            pos_freq: [f, f, 0.0],
            pos_phase: [std::f64::consts::FRAC_PI_2, 0.0, 0.0],
            ..Profile::stationary([0.0; 3])
        };
        let truth = simulate_trajectory(&short(profile), &GRAVITY).unwrap();
        let speed = TAU * a * f;
        for s in &truth {
            assert!((s.state.v.norm() - speed).abs() < 1e-9 * speed);
        }
    }

    #[test]
    fn truth_follows_profile_attitude() {
        let cfg = short(Profile::default());
        let truth = simulate_trajectory(&cfg, &GRAVITY).unwrap();
        for s in truth.iter().step_by(37) {
            let t = s.t as f64 * 1e-9;
            assert!(s.state.q.same_rotation(&cfg.profile.attitude(t), 1e-12));
            assert_abs_diff_eq!(s.state.v, cfg.profile.velocity(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn noiseless_imu_is_exact_and_seeded_runs_repeat() {
        let cfg = short(Profile::default());
        let truth = simulate_trajectory(&cfg, &GRAVITY).unwrap();
        let imu = synthesize_imu(&truth, &[0.0; 13], Vector3::zeros(), Vector3::zeros(), &mut rng_for(1, Stream::Imu));
        for (u, s) in imu.samples.iter().zip(&truth) {
            assert_eq!(u.gyro, s.gyro);
            assert_eq!(u.accel, s.accel);
        }
        let mut sigma = cfg.true_sigma;
        sigma[6..9].fill(0.0);
        let imu = synthesize_imu(&truth, &sigma, Vector3::new(0.1, 0.0, 0.0), Vector3::zeros(), &mut rng_for(1, Stream::Imu));
        assert!(imu.gyro_bias.iter().all(|b| *b == Vector3::new(0.1, 0.0, 0.0)));

        let a = build_scenario(&cfg, &GRAVITY).unwrap();
        let b = build_scenario(&cfg, &GRAVITY).unwrap();
        assert_eq!(a.imu, b.imu);
        assert_eq!(a.tracks, b.tracks);
    }

    #[test]
    fn tracks_skip_hidden_landmarks() {
        let cfg = short(Profile::stationary([0.0; 3]));
        let truth = simulate_trajectory(&cfg, &GRAVITY).unwrap();
        let lm = LandmarkSet::from_pairs([(1, Vector3::new(5.0, 0.0, 0.0)), (2, Vector3::new(-5.0, 0.0, 0.0))]).unwrap();
        let rig = CameraRig::forward_looking();
        let table = synthesize_tracks(&truth, &lm, &rig, 0.0, 10, &mut rng_for(0, Stream::Tracks));
        assert_eq!(table.frames.len(), 41);
        assert!(table.frames.iter().all(|f| f.observations.len() == 1 && f.observations[0].id == 1));
    }
}
