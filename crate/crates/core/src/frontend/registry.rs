use nalgebra::DVector;

use super::{body_point, CameraRig, FeatureObservation};
use crate::nav::{LandmarkSet, NavState};
use crate::ukf::VisionFrame;

/// World-frame landmarks accumulated over a run. A frozen registry (known
/// map) never grows; ids missing from it are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LandmarkRegistry {
    pub landmarks: LandmarkSet,
    pub frozen: bool,
}

impl LandmarkRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn known_map(landmarks: LandmarkSet) -> Self {
        Self {
            landmarks,
            frozen: true,
        }
    }
}

/// Outcome of associating one frame against the registry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Registration {
    /// Ids registered from this frame; they do not appear in `frame`.
    pub new_ids: Vec<u64>,
    /// Previously registered landmarks seen again, ready for the update.
    pub frame: Option<VisionFrame>,
    /// Observations rejected by the disparity floor.
    pub dropped: usize,
}

/// Splits a frame's observations into matched pairs `(l_w, l_b)` for known
/// ids and first sightings, which are registered at `R(q̂) l_b + p̂`.
pub fn register_landmarks(
    observations: &[FeatureObservation],
    estimate: &NavState,
    rig: &CameraRig,
    registry: &mut LandmarkRegistry,
) -> Registration {
    let mut out = Registration::default();
    let mut matched = LandmarkSet::new();
    let mut l_b = Vec::new();
    let mut sorted: Vec<&FeatureObservation> = observations.iter().collect();
    sorted.sort_by_key(|o| o.id);
    for obs in sorted {
        let Ok(p_b) = body_point(obs, rig) else {
            out.dropped += 1;
            continue;
        };
        if let Some(l_w) = registry.landmarks.get(obs.id) {
            if matched.insert(obs.id, *l_w).is_ok() {
                l_b.push(p_b);
            }
        } else if !registry.frozen {
            let l_w = estimate.q.rotate(&p_b) + estimate.p;
            registry
                .landmarks
                .insert(obs.id, l_w)
                .expect("id checked absent");
            out.new_ids.push(obs.id);
        }
    }
    if !matched.is_empty() {
        let z = DVector::from_iterator(3 * l_b.len(), l_b.iter().flat_map(|v| v.iter().copied()));
        out.frame = Some(VisionFrame { z, landmarks: matched });
    }
    out
}
