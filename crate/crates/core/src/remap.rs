//! Replays observed geometry at any keyframe through per-primitive poses.

use crate::scene::{ObjectId, ObjectTrack, PointMap, SceneData, SegmentMask, UNCOVERED};
use crate::Pose;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemapError {
    #[error("object {object} has no pose at keyframe {keyframe}")]
    MissingPose { object: ObjectId, keyframe: usize },
    #[error("keyframe {keyframe} is outside a sequence of {count}")]
    OutOfRange { keyframe: usize, count: usize },
}

/// `T^{p→q} = T(q)⁻¹·T(p)`, taking geometry observed at `p` to time `q`.
/// Self-warps and static objects yield the exact identity.
pub fn warp_transform(obj: &ObjectTrack, p: usize, q: usize) -> Result<Pose, RemapError> {
    if p == q || obj.is_static {
        return Ok(Pose::identity());
    }
    let pose = |k| {
        obj.pose_at(k).ok_or(RemapError::MissingPose {
            object: obj.object_id,
            keyframe: k,
        })
    };
    let tp = pose(p)?;
    let tq = pose(q)?;
    Ok(tq.inverse() * tp)
}

/// One source keyframe replayed at the target time.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedFrame {
    pub source_frame: usize,
    /// Pixels without a pose at both ends are invalid.
    pub points: PointMap,
    /// Source label of every pixel, kept for excluded pixels too.
    pub provenance: SegmentMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneReconstruction {
    pub target_time: usize,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<WarpedFrame>,
}

impl SceneReconstruction {
    pub fn empty(target_time: usize, width: usize, height: usize) -> Self {
        Self {
            target_time,
            width,
            height,
            frames: Vec::new(),
        }
    }

    pub fn frame(&self, source: usize) -> Option<&WarpedFrame> {
        self.frames.iter().find(|f| f.source_frame == source)
    }
}

/// Warp of every labelled object from `source` to `target`; `None` marks
/// objects that cannot be placed at `target`.
fn frame_transforms(scene: &SceneData, source: usize, target: usize) -> BTreeMap<u16, Option<Pose>> {
    scene
        .objects
        .iter()
        .map(|o| (o.object_id.0, warp_transform(o, source, target).ok()))
        .collect()
}

/// Warps source keyframe `source` to time `target`.
pub fn remap_frame(scene: &SceneData, source: usize, target: usize) -> WarpedFrame {
    let kf = &scene.keyframes[source];
    let transforms = frame_transforms(scene, source, target);
    let mut points = PointMap::invalid(kf.points.width(), kf.points.height());
    for (idx, p) in kf.points.iter_valid() {
        let label = kf.mask.raw(idx);
        if source == target || label == UNCOVERED {
            points.set(idx, *p);
            continue;
        }
        match transforms.get(&label) {
            Some(Some(t)) if t.is_identity() => points.set(idx, *p),
            Some(Some(t)) => points.set(idx, t.act(p)),
            _ => {}
        }
    }
    WarpedFrame {
        source_frame: source,
        points,
        provenance: kf.mask.clone(),
    }
}

/// Every keyframe replayed at `target`.
pub fn remap_scene(scene: &SceneData, target: usize) -> Result<SceneReconstruction, RemapError> {
    remap_frames(scene, 0..scene.keyframe_count(), target)
}

/// The keyframes in `sources` replayed at `target`.
pub fn remap_frames(
    scene: &SceneData,
    sources: std::ops::Range<usize>,
    target: usize,
) -> Result<SceneReconstruction, RemapError> {
    let count = scene.keyframe_count();
    for k in [target, sources.end.saturating_sub(1)] {
        if k >= count {
            return Err(RemapError::OutOfRange { keyframe: k, count });
        }
    }
    let frames = sources
        .into_par_iter()
        .map(|k| remap_frame(scene, k, target))
        .collect();
    Ok(SceneReconstruction {
        target_time: target,
        width: scene.width(),
        height: scene.height(),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::Se3Tangent;
    use crate::scene::test_support::labelled_keyframe;
    use crate::scene::{CorrespondenceField, Primitive};
    use crate::Point3;
    use rand::{Rng, SeedableRng};

    fn track_with_poses(poses: &[Pose]) -> ObjectTrack {
        let prims = poses
            .iter()
            .enumerate()
            .map(|(k, p)| Primitive {
                object_id: ObjectId(0),
                keyframe: k,
                pixel_count: 100,
                pose: *p,
            })
            .collect();
        ObjectTrack::new(ObjectId(0), prims)
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        let mut v = || Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        Pose::exp(&Se3Tangent::new(v(), v()))
    }

    #[test]
    fn self_warp_and_gauge() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let poses = [random_pose(&mut rng), random_pose(&mut rng), Pose::identity()];
        let t = track_with_poses(&poses);
        assert_eq!(warp_transform(&t, 1, 1).unwrap(), Pose::identity());
        assert_eq!(warp_transform(&t, 0, 2).unwrap(), poses[0]);
    }

    #[test]
    fn missing_pose_is_an_error() {
        let t = track_with_poses(&[Pose::identity(), Pose::identity()]);
        assert_eq!(
            warp_transform(&t, 0, 5),
            Err(RemapError::MissingPose {
                object: ObjectId(0),
                keyframe: 5
            })
        );
    }

    #[test]
    fn composition_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(73);
        let poses: Vec<Pose> = (0..6).map(|_| random_pose(&mut rng)).collect();
        let t = track_with_poses(&poses);
        for _ in 0..100 {
            let (p, q, r) = (rng.random_range(0..6), rng.random_range(0..6), rng.random_range(0..6));
            let lhs = warp_transform(&t, p, q).unwrap() * warp_transform(&t, r, p).unwrap();
            let rhs = warp_transform(&t, r, q).unwrap();
            assert!((lhs.to_matrix() - rhs.to_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn static_scene_is_time_invariant() {
        let frames = vec![
            labelled_keyframe(10, 10, vec![0; 100], 0.0),
            labelled_keyframe(10, 10, vec![0; 100], 0.0),
        ];
        let mut s = SceneData::from_parts(frames, vec![CorrespondenceField::identity(10, 10, 0)], "metric").unwrap();
        s.objects[0].is_static = true;
        let r = remap_scene(&s, 1).unwrap();
        for f in &r.frames {
            assert_eq!(f.points, s.keyframes[f.source_frame].points);
        }
    }

    #[test]
    fn unplaceable_objects_are_invalid_with_provenance() {
        let mut labels = vec![0u16; 200];
        labels[..50].fill(1);
        let frames = vec![
            labelled_keyframe(10, 20, vec![0; 200], 0.0),
            labelled_keyframe(10, 20, labels, 0.0),
        ];
        let s = SceneData::from_parts(frames, vec![CorrespondenceField::identity(10, 20, 0)], "metric").unwrap();
        // label 1 covers too few pixels to form a track, so it cannot be placed
        let r = remap_scene(&s, 0).unwrap();
        let f = r.frame(1).unwrap();
        assert!(!f.points.is_valid(0));
        assert_eq!(f.provenance.raw(0), 1);
        assert!(f.points.is_valid(60));
        assert!(matches!(remap_scene(&s, 2), Err(RemapError::OutOfRange { .. })));
    }
}
