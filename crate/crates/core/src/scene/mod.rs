//! Keyframes, pointmaps, segment masks, primitives and object tracks.

pub mod ground_truth;
pub mod validate;

pub use ground_truth::{GroundTruth, GtFrame, GtObject};
pub use validate::{validate_scene, Diagnostic};

use crate::{Point3, Pose};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Label value reserved for pixels that belong to no object.
pub const UNCOVERED: u16 = u16::MAX;

/// Primitives with fewer labelled valid pixels than this are dropped.
pub const MIN_PRIMITIVE_PIXELS: usize = 64;

/// Dense object identifier carried by segment masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u16);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("no object survives primitive filtering")]
    EmptyScene,
    #[error("{what}: expected {expected} entries, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("object {object} has no pose at keyframe {keyframe}")]
    MissingPose { object: ObjectId, keyframe: usize },
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}

/// H×W grid of world-frame points with an explicit validity channel.
///
/// Invalid entries are never handed out by the accessors; their storage is
/// kept only so that files roundtrip unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMap {
    width: usize,
    height: usize,
    points: Vec<Point3>,
    valid: Vec<bool>,
}

impl PointMap {
    pub fn new(
        width: usize,
        height: usize,
        points: Vec<Point3>,
        valid: Vec<bool>,
    ) -> Result<Self, SceneError> {
        let n = width * height;
        if points.len() != n {
            return Err(SceneError::ShapeMismatch {
                what: "pointmap points",
                expected: n,
                found: points.len(),
            });
        }
        if valid.len() != n {
            return Err(SceneError::ShapeMismatch {
                what: "pointmap validity",
                expected: n,
                found: valid.len(),
            });
        }
        Ok(Self {
            width,
            height,
            points,
            valid,
        })
    }

    /// All-invalid map.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            points: vec![Point3::zeros(); width * height],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Option<&Point3> {
        if self.valid[idx] {
            Some(&self.points[idx])
        } else {
            None
        }
    }

    pub fn get_uv(&self, u: usize, v: usize) -> Option<&Point3> {
        if u < self.width && v < self.height {
            self.get(self.index(u, v))
        } else {
            None
        }
    }

    pub fn set(&mut self, idx: usize, p: Point3) {
        self.points[idx] = p;
        self.valid[idx] = true;
    }

    pub fn set_invalid(&mut self, idx: usize) {
        self.valid[idx] = false;
    }

    /// Iterates `(flat index, point)` over valid entries only.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, &Point3)> + '_ {
        self.points
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (p, &ok))| ok.then_some((i, p)))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Raw storage including invalid entries, for serialization.
    pub fn raw_points(&self) -> &[Point3] {
        &self.points
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }
}

/// Per-pixel object labels; [`UNCOVERED`] marks unlabelled pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentMask {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl SegmentMask {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self, SceneError> {
        if labels.len() != width * height {
            return Err(SceneError::ShapeMismatch {
                what: "mask labels",
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn uncovered(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![UNCOVERED; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn raw(&self, idx: usize) -> u16 {
        self.labels[idx]
    }

    #[inline]
    pub fn label(&self, idx: usize) -> Option<ObjectId> {
        match self.labels[idx] {
            UNCOVERED => None,
            l => Some(ObjectId(l)),
        }
    }

    pub fn set(&mut self, idx: usize, label: Option<ObjectId>) {
        self.labels[idx] = label.map_or(UNCOVERED, |o| o.0);
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }
}

/// Dense 2D flow from keyframe `source_frame` to `source_frame + 1` with
/// per-pixel confidence in `[0, 1]`. Pixel centres sit at integer
/// coordinates `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceField {
    width: usize,
    height: usize,
    flow: Vec<Vector2<f64>>,
    confidence: Vec<f64>,
    source_frame: usize,
}

impl CorrespondenceField {
    pub fn new(
        width: usize,
        height: usize,
        flow: Vec<Vector2<f64>>,
        confidence: Vec<f64>,
        source_frame: usize,
    ) -> Result<Self, SceneError> {
        let n = width * height;
        if flow.len() != n || confidence.len() != n {
            return Err(SceneError::ShapeMismatch {
                what: "correspondence field",
                expected: n,
                found: flow.len().min(confidence.len()),
            });
        }
        Ok(Self {
            width,
            height,
            flow,
            confidence,
            source_frame,
        })
    }

    /// Zero flow with unit confidence.
    pub fn identity(width: usize, height: usize, source_frame: usize) -> Self {
        Self {
            width,
            height,
            flow: vec![Vector2::zeros(); width * height],
            confidence: vec![1.0; width * height],
            source_frame,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn source_frame(&self) -> usize {
        self.source_frame
    }

    #[inline]
    pub fn flow(&self, idx: usize) -> Vector2<f64> {
        self.flow[idx]
    }

    #[inline]
    pub fn confidence(&self, idx: usize) -> f64 {
        self.confidence[idx]
    }

    pub fn flows(&self) -> &[Vector2<f64>] {
        &self.flow
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidence
    }

    pub fn set(&mut self, idx: usize, flow: Vector2<f64>, confidence: f64) {
        self.flow[idx] = flow;
        self.confidence[idx] = confidence;
    }

    /// Flowed subpixel target of pixel `idx`.
    #[inline]
    pub fn target(&self, idx: usize) -> Vector2<f64> {
        let u = (idx % self.width) as f64;
        let v = (idx / self.width) as f64;
        Vector2::new(u, v) + self.flow[idx]
    }

    #[inline]
    pub fn in_image(&self, p: &Vector2<f64>) -> bool {
        in_image(p, self.width, self.height)
    }

    /// Sets confidence to zero wherever the flowed target leaves the image.
    /// Returns the number of pixels changed.
    pub fn zero_out_of_image(&mut self) -> usize {
        let mut changed = 0;
        for idx in 0..self.flow.len() {
            if self.confidence[idx] != 0.0 && !self.in_image(&self.target(idx)) {
                self.confidence[idx] = 0.0;
                changed += 1;
            }
        }
        changed
    }
}

/// Whether a subpixel position lies within the pixel-centre rectangle
/// `[0, W−1] × [0, H−1]` (NaN is outside).
#[inline]
pub fn in_image(p: &Vector2<f64>, width: usize, height: usize) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keyframe {
    pub points: PointMap,
    pub mask: SegmentMask,
}

/// The points of one object cut from one keyframe, together with the pose
/// taking them into the frame of the object's last observed primitive.
#[derive(Clone, Debug, PartialEq)]
pub struct Primitive {
    pub object_id: ObjectId,
    pub keyframe: usize,
    pub pixel_count: usize,
    pub pose: Pose,
}

/// Temporally ordered primitives sharing one identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTrack {
    pub object_id: ObjectId,
    pub primitives: Vec<Primitive>,
    pub is_static: bool,
    pub parent: Option<ObjectId>,
    /// Poses inferred past the last observation from a parent's motion.
    pub extrapolated: BTreeMap<usize, Pose>,
}

impl ObjectTrack {
    pub fn new(object_id: ObjectId, primitives: Vec<Primitive>) -> Self {
        Self {
            object_id,
            primitives,
            is_static: false,
            parent: None,
            extrapolated: BTreeMap::new(),
        }
    }

    pub fn first_keyframe(&self) -> usize {
        self.primitives[0].keyframe
    }

    /// `t_end`: keyframe of the last observed primitive.
    pub fn last_keyframe(&self) -> usize {
        self.primitives[self.primitives.len() - 1].keyframe
    }

    pub fn primitive_at(&self, keyframe: usize) -> Option<&Primitive> {
        self.primitives
            .binary_search_by_key(&keyframe, |p| p.keyframe)
            .ok()
            .map(|i| &self.primitives[i])
    }

    pub fn is_observed_at(&self, keyframe: usize) -> bool {
        self.primitive_at(keyframe).is_some()
    }

    /// Pose at `keyframe`: identity everywhere for static objects, otherwise
    /// the observed primitive's pose, falling back to an extrapolated one.
    pub fn pose_at(&self, keyframe: usize) -> Option<Pose> {
        if self.is_static {
            return Some(Pose::identity());
        }
        self.primitive_at(keyframe)
            .map(|p| p.pose)
            .or_else(|| self.extrapolated.get(&keyframe).copied())
    }

    pub fn observed_keyframes(&self) -> impl Iterator<Item = usize> + '_ {
        self.primitives.iter().map(|p| p.keyframe)
    }

    /// Consecutive observed keyframe pairs `(i, j)`; a temporal gap links
    /// the observations on either side of it.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.primitives
            .windows(2)
            .map(|w| (w[0].keyframe, w[1].keyframe))
    }

    /// Resets every pose to identity and drops inferred state.
    pub fn reset_poses(&mut self) {
        for p in &mut self.primitives {
            p.pose = Pose::identity();
        }
        self.parent = None;
        self.extrapolated.clear();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneData {
    pub keyframes: Vec<Keyframe>,
    pub correspondences: Vec<CorrespondenceField>,
    pub objects: Vec<ObjectTrack>,
    pub scene_unit: String,
}

impl SceneData {
    /// Assembles a scene and derives its object tracks from the masks.
    pub fn from_parts(
        keyframes: Vec<Keyframe>,
        correspondences: Vec<CorrespondenceField>,
        scene_unit: impl Into<String>,
    ) -> Result<Self, SceneError> {
        let objects = build_objects(&keyframes)?;
        Ok(Self {
            keyframes,
            correspondences,
            objects,
            scene_unit: scene_unit.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.keyframes.first().map_or(0, |k| k.points.width())
    }

    pub fn height(&self) -> usize {
        self.keyframes.first().map_or(0, |k| k.points.height())
    }

    pub fn keyframe_count(&self) -> usize {
        self.keyframes.len()
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectTrack> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectTrack> {
        self.objects.iter_mut().find(|o| o.object_id == id)
    }

    /// Median distance of all valid points to their centroid.
    pub fn scene_scale(&self) -> f64 {
        let mut sum = Point3::zeros();
        let mut n = 0usize;
        for kf in &self.keyframes {
            for (_, p) in kf.points.iter_valid() {
                sum += p;
                n += 1;
            }
        }
        if n == 0 {
            return 1.0;
        }
        let c = sum / n as f64;
        let mut d: Vec<f64> = self
            .keyframes
            .iter()
            .flat_map(|kf| kf.points.iter_valid().map(move |(_, p)| (p - c).norm()))
            .collect();
        let mid = d.len() / 2;
        let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
        if *m > 0.0 {
            *m
        } else {
            1.0
        }
    }

    /// Resets every track to identity poses, dynamic, without parents.
    pub fn reset_poses(&mut self) {
        for o in &mut self.objects {
            o.reset_poses();
            o.is_static = false;
        }
    }
}

/// Groups labelled pixels into one track per identifier, ordered by time,
/// with the last observed primitive as identity gauge.
pub fn build_objects(keyframes: &[Keyframe]) -> Result<Vec<ObjectTrack>, SceneError> {
    let mut counts: BTreeMap<ObjectId, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, kf) in keyframes.iter().enumerate() {
        let mut per_label: BTreeMap<u16, usize> = BTreeMap::new();
        for idx in 0..kf.mask.labels().len() {
            let l = kf.mask.raw(idx);
            if l != UNCOVERED && kf.points.is_valid(idx) {
                *per_label.entry(l).or_default() += 1;
            }
        }
        for (l, c) in per_label {
            if c >= MIN_PRIMITIVE_PIXELS {
                counts.entry(ObjectId(l)).or_default().push((k, c));
            }
        }
    }
    if counts.is_empty() {
        return Err(SceneError::EmptyScene);
    }
    Ok(counts
        .into_iter()
        .map(|(id, frames)| {
            let primitives = frames
                .into_iter()
                .map(|(keyframe, pixel_count)| Primitive {
                    object_id: id,
                    keyframe,
                    pixel_count,
                    pose: Pose::identity(),
                })
                .collect();
            ObjectTrack::new(id, primitives)
        })
        .collect())
}

/// Valid pixels labelled with the primitive's object at its keyframe, as
/// `(flat pixel index, world point)`.
pub fn primitive_points(scene: &SceneData, prim: &Primitive) -> Vec<(usize, Point3)> {
    let kf = &scene.keyframes[prim.keyframe];
    let target = prim.object_id.0;
    kf.points
        .iter_valid()
        .filter(|(i, _)| kf.mask.raw(*i) == target)
        .map(|(i, p)| (i, *p))
        .collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Keyframe whose pixels carry `labels`, with points on a plane z = k.
    pub fn labelled_keyframe(width: usize, height: usize, labels: Vec<u16>, z: f64) -> Keyframe {
        let points = (0..width * height)
            .map(|i| Point3::new((i % width) as f64, (i / width) as f64, z))
            .collect();
        let valid = labels.iter().map(|&l| l != UNCOVERED).collect();
        Keyframe {
            points: PointMap::new(width, height, points, valid).unwrap(),
            mask: SegmentMask::new(width, height, labels).unwrap(),
        }
    }
}
