//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use vinkit::nav::{ImuSample, NavState};
use vinkit::quat::{RotationVector, UnitQuaternion};

pub fn gaussian3<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Uniform random rotation from a normalized Gaussian 4-vector.
pub fn random_quat<R: Rng>(rng: &mut R) -> UnitQuaternion {
    loop {
        let v = Vector4::from_fn(|_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z
        });
        if v.norm() > 1e-3 {
            return UnitQuaternion::from_vector(&v).unwrap();
        }
    }
}

/// Rotation vector with angle uniform in `[0, max_angle)`.
pub fn random_rotvec<R: Rng>(rng: &mut R, max_angle: f64) -> RotationVector {
    let axis = gaussian3(rng, 1.0).normalize();
    RotationVector(axis * rng.random_range(0.0..max_angle))
}

pub fn random_state<R: Rng>(rng: &mut R) -> NavState {
    NavState {
        q: random_quat(rng),
        p: gaussian3(rng, 10.0),
        v: gaussian3(rng, 3.0),
        gyro_bias: gaussian3(rng, 0.01),
        accel_bias: gaussian3(rng, 0.1),
    }
}

/// Hamilton product written out component-wise, scalar first.
pub fn hamilton(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    )
}

/// Rotation matrix from a unit quaternion via the textbook expansion.
pub fn rotation_of(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// One step of the continuous kinematics with input and attitude held at
/// the interval start, integrated as `exp(M dT)` on `[q; p; v; 1]`.
pub fn expm_step(x: &NavState, u: &ImuSample, dt: f64, gravity: &Vector3<f64>) -> (Vector4<f64>, Vector3<f64>, Vector3<f64>) {
    let w = u.gyro - x.gyro_bias;
    let a = u.accel - x.accel_bias;
    let q0 = x.q.coords();
    let f = gravity + rotation_of(&q0) * a;

    let mut m = DMatrix::<f64>::zeros(11, 11);
    // q̇ = ½ q ⊗ [0, ω] = ½ Γ(ω) q
    let gamma = [
        [0.0, -w.x, -w.y, -w.z],
        [w.x, 0.0, w.z, -w.y],
        [w.y, -w.z, 0.0, w.x],
        [w.z, w.y, -w.x, 0.0],
    ];
    for (r, row) in gamma.iter().enumerate() {
        for (c, val) in row.iter().enumerate() {
            m[(r, c)] = 0.5 * val;
        }
    }
    for i in 0..3 {
        m[(4 + i, 7 + i)] = 1.0;
        m[(7 + i, 10)] = f[i];
    }
    let e = (m * dt).exp();
    let mut s = DVector::<f64>::zeros(11);
    s.rows_mut(0, 4).copy_from(&q0);
    s.rows_mut(4, 3).copy_from(&x.p);
    s.rows_mut(7, 3).copy_from(&x.v);
    s[10] = 1.0;
    let out = e * s;
    (
        Vector4::new(out[0], out[1], out[2], out[3]),
        Vector3::new(out[4], out[5], out[6]),
        Vector3::new(out[7], out[8], out[9]),
    )
}

/// Textbook linear Kalman filter.
pub struct LinearKf {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl LinearKf {
    pub fn predict(&mut self, f: &DMatrix<f64>, b: &DVector<f64>, q: &DMatrix<f64>) {
        self.x = f * &self.x + b;
        self.p = f * &self.p * f.transpose() + q;
    }

    pub fn correct(&mut self, h: &DMatrix<f64>, r: &DMatrix<f64>, z: &DVector<f64>) {
        let s = h * &self.p * h.transpose() + r;
        let k = &self.p * h.transpose() * s.try_inverse().expect("innovation covariance invertible");
        self.x = &self.x + &k * (z - h * &self.x);
        let i = DMatrix::<f64>::identity(self.x.len(), self.x.len());
        self.p = (i - &k * h) * &self.p;
        self.p = 0.5 * (&self.p + self.p.transpose());
    }
}

/// Frozen-attitude linear subproblem: identity attitude, no gyro input and no
/// gyro or rotation uncertainty, so `[p v b_a]` evolves linearly and
/// `h(x) = l - p`. Runs the quaternion UKF and [`LinearKf`] side by side for
/// `steps` predict/update cycles and returns the largest absolute mean and
/// covariance discrepancies on `[p v b_a]`.
pub fn linear_equivalence(steps: usize) -> (f64, f64) {
    use nalgebra::Matrix6;
    use vinkit::nav::{LandmarkSet, Matrix15, ProcessNoise};
    use vinkit::ukf::{aggregate_predict, update, ut_weights, FilterConfig, FilterState};

    let cfg = FilterConfig::default();
    let w = ut_weights(&cfg).unwrap();
    let g = cfg.gravity();
    let dt_ns = 5_000_000i64;
    let dt = dt_ns as f64 * 1e-9;
    let sa = 0.05;
    let sl = 0.2;

    let mut imu_cov = Matrix6::zeros();
    for i in 3..6 {
        imu_cov[(i, i)] = sa * sa;
    }
    let noise = ProcessNoise {
        imu: imu_cov,
        additive: Matrix15::zeros(),
    };
    let landmarks = LandmarkSet::from_pairs(vec![
        (1, Vector3::new(5.0, 1.0, 2.0)),
        (2, Vector3::new(-3.0, 4.0, 0.5)),
        (3, Vector3::new(0.5, -6.0, -1.0)),
    ])
    .unwrap();
    let c_l = DMatrix::<f64>::identity(9, 9) * (sl * sl);

    // Error-state index of each KF coordinate: p 3..6, v 6..9, b_a 12..15.
    let idx: Vec<usize> = (3..9).chain(12..15).collect();
    let mut p0 = Matrix15::zeros();
    let diag = [0.3, 0.3, 0.3, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05];
    for (k, &i) in idx.iter().enumerate() {
        p0[(i, i)] = diag[k] * diag[k];
    }
    p0[(3, 6)] = 0.01;
    p0[(6, 3)] = 0.01;
    let x0 = NavState {
        q: UnitQuaternion::identity(),
        p: Vector3::new(0.2, -0.1, 1.0),
        v: Vector3::new(0.5, 0.0, -0.2),
        gyro_bias: Vector3::zeros(),
        accel_bias: Vector3::new(0.02, -0.01, 0.03),
    };
    let mut fs = FilterState::new(x0, p0, 0);

    let mut kf = LinearKf {
        x: DVector::from_iterator(9, x0.p.iter().chain(x0.v.iter()).chain(x0.accel_bias.iter()).copied()),
        p: DMatrix::from_fn(9, 9, |r, c| p0[(idx[r], idx[c])]),
    };
    let mut f = DMatrix::<f64>::identity(9, 9);
    let mut gmat = DMatrix::<f64>::zeros(9, 3);
    for i in 0..3 {
        f[(i, 3 + i)] = dt;
        f[(i, 6 + i)] = -0.5 * dt * dt;
        f[(3 + i, 6 + i)] = -dt;
        gmat[(i, i)] = -0.5 * dt * dt;
        gmat[(3 + i, i)] = -dt;
    }
    let q = &gmat * gmat.transpose() * (sa * sa);
    let mut h = DMatrix::<f64>::zeros(9, 9);
    for j in 0..3 {
        for i in 0..3 {
            h[(3 * j + i, i)] = -1.0;
        }
    }
    let lstack = DVector::from_iterator(9, landmarks.iter().flat_map(|(_, l)| l.iter().copied().collect::<Vec<_>>()));

    for k in 0..steps {
        let t = k as i64 * dt_ns;
        let accel = Vector3::new(0.3 * (k as f64 * 0.05).sin(), 0.1, 9.81 + 0.2 * (k as f64 * 0.03).cos());
        let u = ImuSample::new(t, Vector3::zeros(), accel);
        let z = DVector::from_fn(9, |i, _| lstack[i] - 0.01 * ((k * 9 + i) as f64).sin() - [1.0, 2.0, 0.5][i % 3]);

        let (prior, sigmas) =
            aggregate_predict(&fs, std::slice::from_ref(&u), t + dt_ns, std::slice::from_ref(&noise), &cfg, &w).unwrap();
        fs = update(&prior, &sigmas, &w, &z, &landmarks, &c_l).unwrap();

        let fa = g + accel;
        let mut b = DVector::<f64>::zeros(9);
        for i in 0..3 {
            b[i] = 0.5 * fa[i] * dt * dt;
            b[3 + i] = fa[i] * dt;
        }
        kf.predict(&f, &b, &q);
        kf.correct(&h, &c_l, &(z - &lstack));
    }

    let ux: Vec<f64> = fs.x.p.iter().chain(fs.x.v.iter()).chain(fs.x.accel_bias.iter()).copied().collect();
    let mean_err = ux.iter().zip(kf.x.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ukf_p = DMatrix::from_fn(9, 9, |r, c| fs.p[(idx[r], idx[c])]);
    let cov_err = (ukf_p - &kf.p).amax();
    (mean_err, cov_err)
}

/// Exact initialization and noise-free IMU and landmark data on a rotating,
/// accelerating trajectory with one camera frame per IMU sample. Returns the
/// largest position, velocity and attitude error norms over `steps` cycles.
pub fn noise_free_errors(steps: usize) -> (f64, f64, f64) {
    use vinkit::nav::{measure_all, propagate_state, LandmarkSet, Matrix15, NoiseSigma};
    use vinkit::quat::quat_diff;
    use vinkit::ukf::{FilterConfig, FilterState, Ukf, VisionFrame};

    let cfg = FilterConfig::default();
    let g = cfg.gravity();
    let ukf = Ukf::new(cfg).unwrap();
    let sigma = NoiseSigma::from_slice(&[1e-9; 13]).unwrap();
    let dt_ns = 5_000_000i64;
    let dt = dt_ns as f64 * 1e-9;
    let landmarks = LandmarkSet::from_pairs(
        (0..6u64).map(|i| {
            let a = i as f64;
            (i, Vector3::new(8.0 * a.cos(), 8.0 * a.sin(), 1.0 + 0.5 * a))
        }),
    )
    .unwrap();
    let mut truth = NavState {
        q: vinkit::quat::rotvec_to_quat(&RotationVector::new(0.1, -0.2, 0.7)),
        p: Vector3::new(1.0, 2.0, 1.5),
        v: Vector3::new(0.4, -0.3, 0.1),
        gyro_bias: Vector3::new(0.002, -0.001, 0.003),
        accel_bias: Vector3::new(0.02, 0.01, -0.03),
    };
    let mut fs = FilterState::new(truth, Matrix15::identity() * 1e-18, 0);
    let (mut ep, mut ev, mut er) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..steps {
        let s = k as f64 * dt;
        let u = ImuSample::new(
            k as i64 * dt_ns,
            Vector3::new(0.3 * (2.0 * s).sin(), 0.2 * s.cos(), 0.5),
            Vector3::new(0.5 * s.cos(), 0.3, 9.81 + 0.4 * (3.0 * s).sin()),
        );
        truth = propagate_state(&truth, &u, &nalgebra::Vector6::zeros(), dt, &g).unwrap();
        let frame = VisionFrame {
            z: measure_all(&truth, &landmarks).unwrap(),
            landmarks: landmarks.clone(),
        };
        fs = ukf.step(&fs, std::slice::from_ref(&u), (k as i64 + 1) * dt_ns, Some(&frame), &sigma).unwrap();
        ep = ep.max((fs.x.p - truth.p).norm());
        ev = ev.max((fs.x.v - truth.v).norm());
        er = er.max(quat_diff(&truth.q, &fs.x.q).angle());
    }
    (ep, ev, er)
}

/// Canonical configuration shortened to `duration` seconds.
pub fn short_config(duration: f64, seed: u64) -> vinkit::harness::ExperimentConfig {
    let mut cfg = vinkit::harness::ExperimentConfig::default();
    cfg.sim.duration = duration;
    cfg.sim.seed = seed;
    cfg
}

/// Runs the same scenario with an all-zero DLAM store of the given
/// resolution and with adaptation disabled; returns the largest absolute
/// difference over every estimate component and covariance entry.
pub fn pipeline_equivalence(cfg: &vinkit::harness::ExperimentConfig, width: usize, height: usize) -> f64 {
    use vinkit::dlam::{Dlam, ImuNetWeights, LoadOptions, VisionNetWeights, WeightStore};
    use vinkit::harness::{build_scenario, run_on_scenario};

    let store = WeightStore::from_networks(&ImuNetWeights::zeros(8), &VisionNetWeights::zeros(width, height), 1.0);
    let dlam = Dlam::from_store(&store, LoadOptions::default()).unwrap();
    let scenario = build_scenario(&cfg.sim, &cfg.gravity()).unwrap();
    let a = run_on_scenario(cfg, scenario.clone(), Some(&dlam), true).unwrap();
    let b = run_on_scenario(cfg, scenario, None, true).unwrap();
    assert_eq!(a.output.estimates.len(), b.output.estimates.len());
    assert!(a.output.failure.is_none() && b.output.failure.is_none());
    let mut worst = 0.0f64;
    for (x, y) in a.output.estimates.iter().zip(&b.output.estimates) {
        assert_eq!(x.t, y.t);
        worst = worst.max((x.x.to_vector() - y.x.to_vector()).amax()).max((x.p - y.p).amax());
    }
    worst
}

/// Post-transient position MSE of the filter and of vision-disabled dead
/// reckoning on one seed, plus whether the filter finished without failure.
pub struct SeedResult {
    pub filter_mse_p: f64,
    pub dead_reckoning_mse_p: f64,
    pub completed: bool,
    pub seconds: f64,
}

pub fn canonical_seed(seed: u64) -> SeedResult {
    use vinkit::harness::{build_scenario, run_on_scenario};
    let start = std::time::Instant::now();
    let mut cfg = vinkit::harness::ExperimentConfig::default();
    cfg.sim.seed = seed;
    let scenario = build_scenario(&cfg.sim, &cfg.gravity()).unwrap();
    let filt = run_on_scenario(&cfg, scenario.clone(), None, true).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let dr = run_on_scenario(&cfg, scenario, None, false).unwrap();
    let lf = filt.loss(&cfg.loss).unwrap();
    let ld = dr.loss(&cfg.loss).unwrap();
    let finite = filt.output.estimates.iter().all(|e| e.x.to_vector().iter().all(|v| v.is_finite()));
    SeedResult {
        filter_mse_p: lf.mse_p,
        dead_reckoning_mse_p: ld.mse_p,
        completed: filt.output.failure.is_none() && finite && filt.errors.unmatched == 0,
        seconds,
    }
}

/// Largest componentwise gap between `propagate_state` and the matrix
/// exponential of the continuous model over `n` random states.
pub fn discretization_gap(n: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use vinkit::nav::{propagate_state, GRAVITY};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dt = 0.005;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let x = random_state(&mut rng);
        let u = ImuSample::new(0, gaussian3(&mut rng, 2.0), gaussian3(&mut rng, 5.0) + Vector3::new(0.0, 0.0, 9.81));
        let y = propagate_state(&x, &u, &nalgebra::Vector6::zeros(), dt, &GRAVITY).unwrap();
        let (q, p, v) = expm_step(&x, &u, dt, &GRAVITY);
        // Both sides are unit quaternions; compare up to the double cover.
        let qc = y.q.coords();
        let dq = (qc - q).amax().min((qc + q).amax());
        worst = worst.max(dq).max((y.p - p).amax()).max((y.v - v).amax());
        assert_eq!(y.gyro_bias, x.gyro_bias);
        assert_eq!(y.accel_bias, x.accel_bias);
    }
    worst
}
