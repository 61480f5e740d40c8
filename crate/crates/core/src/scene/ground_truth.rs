use super::{ObjectId, PointMap, SegmentMask};
use crate::Pose;

/// Noise-free geometry of every object at one keyframe, including objects
/// hidden from the input stream.
#[derive(Clone, Debug, PartialEq)]
pub struct GtFrame {
    pub points: PointMap,
    pub labels: SegmentMask,
    /// Pixels belonging to objects that move at some point in the sequence.
    pub dynamic: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtObject {
    pub object_id: ObjectId,
    pub diameter: f64,
    /// World motion `M_k` applied to the rest geometry at every keyframe.
    pub world_motion: Vec<Pose>,
}

impl GtObject {
    /// Ground-truth pose of the primitive at `k` expressed in the frame of the
    /// primitive at `reference`: `M_ref · M_k⁻¹`.
    pub fn relative_pose(&self, k: usize, reference: usize) -> Pose {
        self.world_motion[reference] * self.world_motion[k].inverse()
    }

    pub fn is_dynamic(&self) -> bool {
        self.world_motion.iter().any(|m| !m.is_identity())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub frames: Vec<GtFrame>,
    pub objects: Vec<GtObject>,
}

impl GroundTruth {
    pub fn object(&self, id: ObjectId) -> Option<&GtObject> {
        self.objects.iter().find(|o| o.object_id == id)
    }
}
