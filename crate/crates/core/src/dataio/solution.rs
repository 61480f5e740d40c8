use super::{pose_from_rows, pose_to_rows, read_json, write_json, DataError};
use crate::scene::{ObjectId, SceneData};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub keyframe: usize,
    /// Row-major homogeneous matrix.
    pub matrix: [[f64; 4]; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvedObject {
    pub object_id: ObjectId,
    pub is_static: bool,
    pub parent: Option<ObjectId>,
    pub poses: Vec<PoseEntry>,
    pub extrapolated: Vec<PoseEntry>,
}

/// Every estimated quantity of a scene: per-primitive poses, static flags,
/// parents and extrapolated poses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub objects: Vec<SolvedObject>,
}

impl Solution {
    pub fn from_scene(scene: &SceneData) -> Self {
        let entry = |(&keyframe, pose)| PoseEntry {
            keyframe,
            matrix: pose_to_rows(pose),
        };
        Self {
            objects: scene
                .objects
                .iter()
                .map(|o| SolvedObject {
                    object_id: o.object_id,
                    is_static: o.is_static,
                    parent: o.parent,
                    poses: o.primitives.iter().map(|p| entry((&p.keyframe, &p.pose))).collect(),
                    extrapolated: o.extrapolated.iter().map(entry).collect(),
                })
                .collect(),
        }
    }
}

pub fn save_solution(path: &Path, solution: &Solution) -> Result<(), DataError> {
    write_json(path, solution)
}

pub fn load_solution(path: &Path) -> Result<Solution, DataError> {
    read_json(path)
}

/// Installs a solution on a scene whose tracks it must match exactly.
pub fn apply_solution(scene: &mut SceneData, solution: &Solution, source: &Path) -> Result<(), DataError> {
    let bad = |detail: String| DataError::Manifest {
        path: source.to_owned(),
        detail,
    };
    if solution.objects.len() != scene.objects.len() {
        return Err(bad(format!(
            "solution lists {} objects, scene has {}",
            solution.objects.len(),
            scene.objects.len()
        )));
    }
    for s in &solution.objects {
        let obj = scene
            .object_mut(s.object_id)
            .ok_or_else(|| bad(format!("object {} is not in the scene", s.object_id)))?;
        if s.poses.len() != obj.primitives.len() {
            return Err(bad(format!("object {} pose count does not match its track", s.object_id)));
        }
        for (prim, e) in obj.primitives.iter_mut().zip(&s.poses) {
            if prim.keyframe != e.keyframe {
                return Err(bad(format!("object {} has no primitive at keyframe {}", s.object_id, e.keyframe)));
            }
            prim.pose = pose_from_rows(&e.matrix)
                .ok_or_else(|| bad(format!("object {} has an invalid pose at {}", s.object_id, e.keyframe)))?;
        }
        obj.is_static = s.is_static;
        obj.parent = s.parent;
        obj.extrapolated = s
            .extrapolated
            .iter()
            .map(|e| {
                pose_from_rows(&e.matrix)
                    .map(|p| (e.keyframe, p))
                    .ok_or_else(|| bad(format!("object {} has an invalid pose at {}", s.object_id, e.keyframe)))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
    }
    Ok(())
}
