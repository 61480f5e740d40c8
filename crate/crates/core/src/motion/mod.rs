//! Object permanence: contact detection, velocity clustering, parent
//! assignment, and extrapolation of occluded objects.

mod obb;

pub use obb::{fit_obb, in_contact, Obb, ObbError};

use crate::lie::{LieError, Se3};
use crate::remap::{warp_transform, RemapError};
use crate::scalar::Real;
use crate::scene::{primitive_points, ObjectId, ObjectTrack, SceneData};
use crate::{Point3, Pose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub const DEFAULT_SIGMA_TAU_FRACTION: f64 = 0.02;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("invalid motion setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Remap(#[from] RemapError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSegConfig {
    pub alpha: f64,
    /// Translational std in scene units; `None` selects a fraction of the
    /// scene scale.
    pub sigma_tau: Option<f64>,
    /// Rotational std in radians.
    pub sigma_psi: f64,
    pub distance_threshold: f64,
}

impl Default for MotionSegConfig {
    fn default() -> Self {
        Self {
            alpha: 1.1,
            sigma_tau: None,
            sigma_psi: 0.1,
            distance_threshold: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMotionConfig {
    pub alpha: f64,
    pub sigma_tau: f64,
    pub sigma_psi: f64,
    pub distance_threshold: f64,
}

impl MotionSegConfig {
    pub fn resolve(&self, scene_scale: f64) -> Result<ResolvedMotionConfig, MotionError> {
        let bad = |field, reason: &str| {
            Err(MotionError::InvalidConfig {
                field,
                reason: reason.to_owned(),
            })
        };
        let sigma_tau = self.sigma_tau.unwrap_or(DEFAULT_SIGMA_TAU_FRACTION * scene_scale);
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be at least 1");
        }
        if !(sigma_tau > 0.0 && sigma_tau.is_finite()) {
            return bad("sigma_tau", "must be positive");
        }
        if !(self.sigma_psi > 0.0 && self.sigma_psi.is_finite()) {
            return bad("sigma_psi", "must be positive");
        }
        if !(self.distance_threshold > 0.0) {
            return bad("distance_threshold", "must be positive");
        }
        Ok(ResolvedMotionConfig {
            alpha: self.alpha,
            sigma_tau,
            sigma_psi: self.sigma_psi,
            distance_threshold: self.distance_threshold,
        })
    }
}

/// Mahalanobis length of `log(V⁻¹·W)` with diagonal covariance
/// `(σ_τ² I, σ_ψ² I)`.
pub fn velocity_distance<T: Real>(v: &Se3<T>, w: &Se3<T>, sigma_tau: T, sigma_psi: T) -> Result<T, LieError> {
    let tau = (v.inverse() * *w).log()?;
    let a = tau.rho.norm_squared() / (sigma_tau * sigma_tau);
    let b = tau.phi.norm_squared() / (sigma_psi * sigma_psi);
    Ok((a + b).sqrt())
}

/// `T(t)⁻¹·T(t−1)`, the motion from `t − 1` to `t`; `None` unless both poses
/// are observed.
pub fn velocity(obj: &ObjectTrack, t: usize) -> Option<Pose> {
    if t == 0 {
        return None;
    }
    let prev = obj.primitive_at(t - 1)?.pose;
    let cur = obj.primitive_at(t)?.pose;
    Some(cur.inverse() * prev)
}

/// Mean velocity distance over intervals observed by both objects, with the
/// interval count; `None` without a shared interval.
pub fn mean_velocity_distance(
    a: &ObjectTrack,
    b: &ObjectTrack,
    keyframes: usize,
    config: &ResolvedMotionConfig,
) -> Result<Option<(f64, usize)>, LieError> {
    let mut sum = 0.0;
    let mut n = 0;
    for t in 1..keyframes {
        if let (Some(va), Some(vb)) = (velocity(a, t), velocity(b, t)) {
            sum += velocity_distance(&va, &vb, config.sigma_tau, config.sigma_psi)?;
            n += 1;
        }
    }
    Ok((n > 0).then(|| (sum / n as f64, n)))
}

/// Box around the points of `obj` observed at `keyframe`.
pub fn object_box(scene: &SceneData, obj: &ObjectTrack, keyframe: usize) -> Option<Obb<f64>> {
    let prim = obj.primitive_at(keyframe)?;
    let pts: Vec<Point3> = primitive_points(scene, prim).into_iter().map(|(_, p)| p).collect();
    match fit_obb(&pts) {
        Ok(b) => Some(b),
        Err(ObbError::DegenerateCloud { fallback, .. }) => Some(fallback),
    }
}

/// Objects reachable from `start` through inflated-box contact among the
/// objects observed at `keyframe`, excluding `start`.
pub fn contact_closure(
    scene: &SceneData,
    start: ObjectId,
    keyframe: usize,
    alpha: f64,
) -> BTreeMap<ObjectId, usize> {
    let boxes: BTreeMap<ObjectId, Obb<f64>> = scene
        .objects
        .par_iter()
        .filter_map(|o| object_box(scene, o, keyframe).map(|b| (o.object_id, b)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let mut depth = BTreeMap::new();
    if !boxes.contains_key(&start) {
        return depth;
    }
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut seen = BTreeSet::from([start]);
    while let Some((id, d)) = queue.pop_front() {
        for (&other, b) in &boxes {
            if !seen.contains(&other) && in_contact(&boxes[&id], b, alpha) {
                seen.insert(other);
                depth.insert(other, d + 1);
                queue.push_back((other, d + 1));
            }
        }
    }
    depth
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentCandidate {
    pub object_id: ObjectId,
    /// Contact hops from the child.
    pub contact_depth: usize,
    pub mean_distance: Option<f64>,
    pub intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentAssignment {
    pub object_id: ObjectId,
    /// Last observed keyframe, where contact is evaluated.
    pub contact_time: usize,
    pub parent: Option<ObjectId>,
    pub candidates: Vec<ParentCandidate>,
}

/// Parent choice for every dynamic object that disappears before the last
/// keyframe. Candidates are reachable by contact at the child's last
/// observation and stay observed strictly longer, which keeps the parent
/// relation acyclic; the lowest mean velocity distance below the threshold
/// wins, ties going to the lowest id.
pub fn assign_parents(scene: &SceneData, config: &ResolvedMotionConfig) -> Result<Vec<ParentAssignment>, MotionError> {
    let n = scene.keyframe_count();
    let children: Vec<&ObjectTrack> = scene
        .objects
        .iter()
        .filter(|o| !o.is_static && !o.primitives.is_empty() && o.last_keyframe() + 1 < n)
        .collect();
    children
        .par_iter()
        .map(|child| {
            let te = child.last_keyframe();
            let reach = contact_closure(scene, child.object_id, te, config.alpha);
            let mut candidates = Vec::new();
            let mut best: Option<(f64, ObjectId)> = None;
            for (&id, &depth) in &reach {
                let other = scene.object(id).expect("reachable objects exist");
                if other.last_keyframe() <= te {
                    continue;
                }
                let md = mean_velocity_distance(child, other, n, config)?;
                if let Some((d, _)) = md {
                    if d < config.distance_threshold && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, id));
                    }
                }
                candidates.push(ParentCandidate {
                    object_id: id,
                    contact_depth: depth,
                    mean_distance: md.map(|m| m.0),
                    intervals: md.map_or(0, |m| m.1),
                });
            }
            Ok(ParentAssignment {
                object_id: child.object_id,
                contact_time: te,
                parent: best.map(|b| b.1),
                candidates,
            })
        })
        .collect()
}

/// Pose of `obj` at `t > t_end` such that its warp from `t_end` to `t` equals
/// the parent's: `T_obj(t) = T_obj(t_end)·W⁻¹` with `W = T_par(t)⁻¹·T_par(t_end)`.
pub fn extrapolate_pose(obj: &ObjectTrack, parent: &ObjectTrack, t: usize) -> Result<Pose, RemapError> {
    let te = obj.last_keyframe();
    let w = warp_transform(parent, te, t)?;
    if t == te {
        return Ok(obj.primitives[obj.primitives.len() - 1].pose);
    }
    if parent.pose_at(te).is_none() {
        return Err(RemapError::MissingPose {
            object: parent.object_id,
            keyframe: te,
        });
    }
    Ok(obj.primitives[obj.primitives.len() - 1].pose * w.inverse())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionReport {
    pub config: ResolvedMotionConfig,
    pub assignments: Vec<ParentAssignment>,
    /// Keyframes that received an extrapolated pose, per object.
    pub extrapolated: BTreeMap<ObjectId, Vec<usize>>,
}

/// Assigns parents and records extrapolated poses for every keyframe after
/// each child's last observation. Parents are resolved before their
/// children, so chains of occluded objects extrapolate transitively.
pub fn apply_object_permanence(scene: &mut SceneData, config: &MotionSegConfig) -> Result<MotionReport, MotionError> {
    let resolved = config.resolve(scene.scene_scale())?;
    for o in &mut scene.objects {
        o.parent = None;
        o.extrapolated.clear();
    }
    let assignments = assign_parents(scene, &resolved)?;
    let n = scene.keyframe_count();
    let mut order: Vec<&ParentAssignment> = assignments.iter().filter(|a| a.parent.is_some()).collect();
    // parents end strictly later than their children
    order.sort_by_key(|a| (std::cmp::Reverse(a.contact_time), a.object_id));
    let mut extrapolated = BTreeMap::new();
    for a in order {
        let parent_id = a.parent.expect("filtered");
        let parent = scene.object(parent_id).expect("parent exists").clone();
        let child = scene.object(a.object_id).expect("child exists");
        let mut poses = BTreeMap::new();
        for t in a.contact_time + 1..n {
            if parent.pose_at(t).is_some() {
                poses.insert(t, extrapolate_pose(child, &parent, t)?);
            }
        }
        extrapolated.insert(a.object_id, poses.keys().copied().collect());
        let child = scene.object_mut(a.object_id).expect("child exists");
        child.parent = Some(parent_id);
        child.extrapolated = poses;
    }
    Ok(MotionReport {
        config: resolved,
        assignments,
        extrapolated,
    })
}

#[cfg(test)]
mod tests;
