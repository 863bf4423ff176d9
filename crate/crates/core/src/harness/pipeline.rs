//! Filter loop: per camera frame, aggregate predict over the IMU samples
//! since the previous frame, register/associate landmarks against the prior,
//! and apply the vision update.

use crate::dlam::{Dlam, FeatureMap, IMU_WINDOW};
use crate::frontend::{register_landmarks, CameraRig, FeatureObservation, LandmarkRegistry, TrackTable};
use crate::nav::{assemble_measurement_cov, assemble_process_cov, ImuSample, NoiseSigma};
use crate::ukf::{aggregate_predict, update, ut_weights, FilterConfig, FilterState, UkfError};

use super::HarnessError;

pub struct RunInputs<'a> {
    pub imu: &'a [ImuSample],
    pub tracks: &'a TrackTable,
    pub rig: &'a CameraRig,
    pub init: FilterState,
    pub registry: LandmarkRegistry,
}

#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    pub filter: &'a FilterConfig,
    pub nominal: &'a NoiseSigma,
    /// When false, frames only set the output timestamps (dead reckoning).
    pub vision: bool,
    pub dlam: Option<&'a Dlam>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    /// One posterior per camera frame, starting with the initial state.
    pub estimates: Vec<FilterState>,
    pub registered: usize,
    pub dropped: usize,
    pub updates: usize,
    /// Set when the filter stopped early; `estimates` holds what was done.
    pub failure: Option<UkfError>,
}

/// Binary keypoint images: each observation lights the pixel it falls in
/// after scaling the rig's image to `width × height`.
pub fn render_keypoints(
    observations: &[FeatureObservation],
    rig: &CameraRig,
    width: usize,
    height: usize,
) -> (FeatureMap, FeatureMap) {
    let mut left = FeatureMap::zeros(1, height, width);
    let mut right = FeatureMap::zeros(1, height, width);
    let (sx, sy) = (width as f64 / rig.width, height as f64 / rig.height);
    let put = |img: &mut FeatureMap, u: f64, v: f64| {
        let (x, y) = ((u * sx).floor(), (v * sy).floor());
        if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
            img.data[y as usize * width + x as usize] = 1.0;
        }
    };
    for o in observations {
        put(&mut left, o.u_l, o.v_l);
        put(&mut right, o.u_r, o.v_r);
    }
    (left, right)
}

fn noise_sigma(
    dlam: Option<&Dlam>,
    history: &[ImuSample],
    observations: Option<&[FeatureObservation]>,
    rig: &CameraRig,
    nominal: &NoiseSigma,
) -> Result<NoiseSigma, HarnessError> {
    let Some(d) = dlam else {
        return Ok(*nominal);
    };
    if history.len() < IMU_WINDOW {
        return Ok(*nominal);
    }
    let window = &history[history.len() - IMU_WINDOW..];
    let images = observations
        .filter(|o| !o.is_empty())
        .map(|o| {
            let (w, h) = d.image_size();
            render_keypoints(o, rig, w, h)
        });
    let gamma = d.gamma(window, images.as_ref().map(|(l, r)| (l, r)))?;
    Ok(d.sigma(&gamma, nominal))
}

pub fn run_filter(inputs: RunInputs<'_>, opts: RunOptions<'_>) -> Result<RunOutput, HarnessError> {
    let weights = ut_weights(opts.filter).map_err(|e| HarnessError::Config(e.to_string()))?;
    let RunInputs {
        imu,
        tracks,
        rig,
        init,
        mut registry,
    } = inputs;
    let mut out = RunOutput::default();
    let t0 = init.t;
    let mut fs = init;

    for frame in tracks.frames.iter().filter(|f| f.t >= t0) {
        if frame.t == fs.t {
            if opts.vision {
                let reg = register_landmarks(&frame.observations, &fs.x, rig, &mut registry);
                out.registered += reg.new_ids.len();
                out.dropped += reg.dropped;
            }
            if out.estimates.is_empty() {
                out.estimates.push(fs.clone());
            }
            continue;
        }
        let start = imu.partition_point(|u| u.t <= fs.t).saturating_sub(1);
        let end = imu.partition_point(|u| u.t < frame.t);
        if start >= end {
            return Err(HarnessError::Data(format!(
                "no IMU samples before frame at t = {}",
                frame.t
            )));
        }
        let observations = opts.vision.then_some(frame.observations.as_slice());
        let sigma = noise_sigma(opts.dlam, &imu[..end], observations, rig, opts.nominal)?;
        let noise = assemble_process_cov(&sigma);

        let step = (|| -> Result<(FilterState, bool), UkfError> {
            let (prior, sigmas) = aggregate_predict(
                &fs,
                &imu[start..end],
                frame.t,
                std::slice::from_ref(&noise),
                opts.filter,
                &weights,
            )?;
            if !opts.vision {
                return Ok((prior, false));
            }
            let reg = register_landmarks(&frame.observations, &prior.x, rig, &mut registry);
            out.registered += reg.new_ids.len();
            out.dropped += reg.dropped;
            match reg.frame {
                Some(vf) => {
                    let c_l = assemble_measurement_cov(sigma.landmark(), vf.landmarks.measurement_dim())?;
                    let post = update(&prior, &sigmas, &weights, &vf.z, &vf.landmarks, &c_l)?;
                    Ok((post, true))
                }
                None => Ok((prior, false)),
            }
        })();
        match step {
            Ok((post, updated)) => {
                out.updates += updated as usize;
                if out.estimates.is_empty() {
                    out.estimates.push(fs.clone());
                }
                fs = post;
                out.estimates.push(fs.clone());
            }
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::TrackFrame;

    #[test]
    fn keypoints_land_in_scaled_pixels() {
        let rig = CameraRig::forward_looking();
        let obs = [FeatureObservation {
            t: 0,
            id: 0,
            u_l: 376.0,
            v_l: 240.0,
            u_r: 0.5,
            v_r: 479.9,
        }];
        let (l, r) = render_keypoints(&obs, &rig, 94, 60);
        assert_eq!(l.data.iter().sum::<f32>(), 1.0);
        assert_eq!(l.at(0, 30, 47), 1.0);
        assert_eq!(r.at(0, 59, 0), 1.0);
    }

    #[test]
    fn frames_without_imu_are_a_data_error() {
        let rig = CameraRig::forward_looking();
        let tracks = TrackTable {
            frames: vec![TrackFrame {
                t: 10,
                observations: vec![],
            }],
        };
        let cfg = FilterConfig::default();
        let nominal = NoiseSigma::from_slice(&[0.1; 13]).unwrap();
        let inputs = RunInputs {
            imu: &[],
            tracks: &tracks,
            rig: &rig,
            init: FilterState::new(Default::default(), crate::nav::Matrix15::identity(), 0),
            registry: LandmarkRegistry::new(),
        };
        let opts = RunOptions {
            filter: &cfg,
            nominal: &nominal,
            vision: true,
            dlam: None,
        };
        assert!(matches!(run_filter(inputs, opts), Err(HarnessError::Data(_))));
    }
}
