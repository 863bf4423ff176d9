use nalgebra::Vector3;
use proptest::prelude::*;

use vinkit::frontend::*;
use vinkit::nav::{ImuSample, LandmarkSet, NavState};
use vinkit::quat::{rotvec_to_quat, RotationVector};

fn obs(id: u64, p: [f64; 4]) -> FeatureObservation {
    FeatureObservation { t: 0, id, u_l: p[0], v_l: p[1], u_r: p[2], v_r: p[3] }
}

proptest! {
    #[test]
    fn projection_then_triangulation_recovers_point(
        x in -3.0f64..3.0, y in -2.0f64..2.0, z in 1.0f64..30.0,
    ) {
        let rig = CameraRig::forward_looking();
        let p_c = Vector3::new(x, y, z);
        if let Some(px) = rig.project(&p_c) {
            let back = triangulate_stereo(&obs(1, px), &rig).unwrap();
            prop_assert!((back - p_c).norm() < 1e-9 * z.max(1.0));
            let p_b = body_point(&obs(1, px), &rig).unwrap();
            prop_assert!((rig.body_to_camera(&p_b) - p_c).norm() < 1e-9 * z.max(1.0));
        }
    }

    #[test]
    fn depth_falls_with_disparity(d1 in 0.6f64..100.0, d2 in 0.6f64..100.0) {
        let rig = CameraRig::forward_looking();
        let z = |d: f64| triangulate_stereo(&obs(1, [400.0, 250.0, 400.0 - d, 250.0]), &rig).unwrap().z;
        if d1 < d2 {
            prop_assert!(z(d1) > z(d2));
        }
    }
}

#[test]
fn small_disparity_is_rejected() {
    let rig = CameraRig::forward_looking();
    for d in [0.5, 0.1, 0.0, -2.0] {
        assert!(matches!(
            triangulate_stereo(&obs(7, [400.0, 250.0, 400.0 - d, 250.0]), &rig),
            Err(FrontendError::Disparity { id: 7, .. })
        ));
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let imu: Vec<ImuSample> = (0..20)
        .map(|k| ImuSample::new(1_000_000_000 + k * 5_000_000, Vector3::new(0.1, -0.2, k as f64 * 1e-3), Vector3::new(0.0, 0.3, 9.81)))
        .collect();
    write_imu_csv(&dir.path().join("imu.csv"), &imu).unwrap();
    assert_eq!(parse_imu_csv(&dir.path().join("imu.csv")).unwrap(), imu);

    let gt: Vec<(i64, NavState)> = (0..5)
        .map(|k| {
            (k * 10, NavState {
                q: rotvec_to_quat(&RotationVector::new(0.1 * k as f64, 0.2, -0.3)),
                p: Vector3::new(k as f64, 2.0, 1.0 / 3.0),
                v: Vector3::new(0.1, 0.0, -0.1),
                gyro_bias: Vector3::new(1e-3, 0.0, 0.0),
                accel_bias: Vector3::new(0.0, 0.02, 0.0),
            })
        })
        .collect();
    write_groundtruth_csv(&dir.path().join("gt.csv"), &gt).unwrap();
    let back = parse_groundtruth_csv(&dir.path().join("gt.csv")).unwrap();
    assert_eq!(back.len(), gt.len());
    for ((t1, a), (t2, b)) in back.iter().zip(&gt) {
        assert_eq!(t1, t2);
        assert!(a.boxminus(b).amax() < 1e-12);
    }

    let tracks = TrackTable {
        frames: vec![
            TrackFrame { t: 0, observations: vec![obs(1, [10.0, 20.0, 8.0, 20.0]), obs(4, [30.5, 40.25, 20.0, 40.25])] },
            TrackFrame { t: 50, observations: vec![] },
            TrackFrame { t: 100, observations: vec![FeatureObservation { t: 100, ..obs(1, [11.0, 21.0, 9.0, 21.0]) }] },
        ],
    };
    let tracks = TrackTable {
        frames: tracks.frames.into_iter().map(|f| TrackFrame {
            observations: f.observations.into_iter().map(|o| FeatureObservation { t: f.t, ..o }).collect(),
            ..f
        }).collect(),
    };
    write_tracks_csv(&dir.path().join("tracks.csv"), &tracks).unwrap();
    let back = parse_tracks(&dir.path().join("tracks.csv")).unwrap();
    let non_empty: Vec<_> = tracks.frames.iter().filter(|f| !f.observations.is_empty()).cloned().collect();
    let back_non_empty: Vec<_> = back.frames.iter().filter(|f| !f.observations.is_empty()).cloned().collect();
    assert_eq!(back_non_empty, non_empty);

    let lm = LandmarkSet::from_pairs(vec![(3, Vector3::new(1.0, 2.0, 3.0)), (9, Vector3::new(-1.5, 0.0, 7.25))]).unwrap();
    write_landmarks_csv(&dir.path().join("lm.csv"), &lm).unwrap();
    assert_eq!(parse_landmarks_csv(&dir.path().join("lm.csv")).unwrap(), lm);

    let rig = CameraRig::forward_looking();
    std::fs::write(dir.path().join("calib.toml"), format_calibration(&rig)).unwrap();
    assert_eq!(load_calibration(&dir.path().join("calib.toml")).unwrap(), rig);
}

#[test]
fn malformed_inputs_are_reported() {
    assert!(matches!(
        parse_imu_str("10,0,0,0,0,0,9.8\n5,0,0,0,0,0,9.8\n"),
        Err(FrontendError::NonMonotonic { .. })
    ));
    assert!(matches!(
        parse_groundtruth_str("0,0,0,0,0.9,0,0,0,0,0,0\n"),
        Err(FrontendError::QuaternionNorm { .. })
    ));
    assert!(matches!(parse_imu_str("1,2,x,4,5,6,7\n"), Err(FrontendError::Parse { .. })));
    assert!(matches!(
        parse_tracks_str("0,1,10,10,5,10\n0,1,11,10,6,10\n"),
        Err(FrontendError::DuplicateIds { .. })
    ));
    assert!(load_calibration(std::path::Path::new("/nonexistent/calib.toml")).is_err());
}

#[test]
fn registry_registers_then_matches() {
    let rig = CameraRig::forward_looking();
    let x = NavState {
        q: rotvec_to_quat(&RotationVector::new(0.0, 0.0, 0.3)),
        p: Vector3::new(1.0, -1.0, 0.5),
        ..NavState::default()
    };
    let l_w = [Vector3::new(8.0, 1.0, 1.0), Vector3::new(10.0, 2.5, 0.0)];
    let frame: Vec<FeatureObservation> = l_w
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p_c = rig.body_to_camera(&x.q.inverse_rotate(&(l - x.p)));
            obs(i as u64 + 1, rig.project(&p_c).unwrap())
        })
        .collect();

    let mut reg = LandmarkRegistry::new();
    let first = register_landmarks(&frame, &x, &rig, &mut reg);
    assert_eq!(first.new_ids, vec![1, 2]);
    assert!(first.frame.is_none());
    for (i, l) in l_w.iter().enumerate() {
        assert!((reg.landmarks.get(i as u64 + 1).unwrap() - l).norm() < 1e-9);
    }
    let second = register_landmarks(&frame, &x, &rig, &mut reg);
    assert!(second.new_ids.is_empty());
    let vf = second.frame.unwrap();
    assert_eq!(vf.landmarks.ids(), vec![1, 2]);
    assert_eq!(vf.z.len(), 6);

    let mut known = LandmarkRegistry::known_map(LandmarkSet::from_pairs(vec![(2, l_w[1])]).unwrap());
    let r = register_landmarks(&frame, &x, &rig, &mut known);
    assert!(r.new_ids.is_empty());
    assert_eq!(r.frame.unwrap().landmarks.ids(), vec![2]);
    assert!(!known.landmarks.contains(1));
}
