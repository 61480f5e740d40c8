//! On-disk scenes, ground truth, reconstructions and solutions.
//!
//! A dataset directory holds a JSON `manifest` and one binary array per
//! channel and keyframe. Geometry is stored as `f32`, so a scene survives a
//! save/load roundtrip unchanged exactly when its values are representable
//! in single precision; [`quantize_scene`] produces such a scene.

pub mod array;
mod recon;
mod solution;

pub use recon::{load_reconstructions, save_reconstructions, ReconstructionManifest, RECONSTRUCTION_FORMAT};
pub use solution::{apply_solution, load_solution, save_solution, Solution};

use crate::scene::validate::{validate_scene, Diagnostic};
use crate::scene::{
    CorrespondenceField, GroundTruth, GtFrame, GtObject, Keyframe, ObjectId, PointMap, SceneData, SceneError,
    SegmentMask,
};
use crate::{Point3, Pose};
use array::{ArrayError, ElemType, Payload, Shape};
use nalgebra::{Matrix4, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Component, Path, PathBuf};
use thiserror::Error;

pub const MANIFEST: &str = "manifest";
pub const SCENE_FORMAT: &str = "glue4d-scene";
pub const GROUND_TRUTH_FORMAT: &str = "glue4d-ground-truth";
pub const FORMAT_VERSION: u32 = 1;
/// Rotation tolerance when parsing stored poses.
pub const POSE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("format error in {}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
    #[error("manifest error in {}: {detail}", path.display())]
    Manifest { path: PathBuf, detail: String },
    #[error("scene error: {0}")]
    Scene(#[from] SceneError),
    #[error("validation error: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Diagnostic>),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    fn format(path: &Path, detail: impl ToString) -> Self {
        DataError::Format {
            path: path.to_owned(),
            detail: detail.to_string(),
        }
    }

    fn manifest(path: &Path, detail: impl ToString) -> Self {
        DataError::Manifest {
            path: path.to_owned(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn array(path: &Path, e: ArrayError) -> Self {
        match e {
            ArrayError::Io(source) if source.kind() == std::io::ErrorKind::NotFound => {
                Self::manifest(path, "inventory file is missing")
            }
            ArrayError::Io(source) => Self::io(path, source),
            other => Self::format(path, other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub points: String,
    pub mask: String,
    pub valid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub source_frame: usize,
    pub flow: String,
    pub confidence: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub keyframe_count: usize,
    pub scene_unit: String,
    pub frames: Vec<FrameEntry>,
    pub correspondences: Vec<PairEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtFrameEntry {
    pub points: String,
    pub labels: String,
    pub valid: String,
    pub dynamic: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtObjectEntry {
    pub object_id: ObjectId,
    pub diameter: f64,
    /// Row-major homogeneous matrices, one per keyframe.
    pub world_motion: Vec<[[f64; 4]; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthManifest {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frames: Vec<GtFrameEntry>,
    pub objects: Vec<GtObjectEntry>,
}

pub fn pose_to_rows(p: &Pose) -> [[f64; 4]; 4] {
    let m = p.to_matrix();
    [0, 1, 2, 3].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)], m[(r, 3)]])
}

pub fn pose_from_rows(rows: &[[f64; 4]; 4]) -> Option<Pose> {
    let m = Matrix4::from_fn(|r, c| rows[r][c]);
    Pose::from_matrix(&m, POSE_TOLERANCE).ok()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DataError::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(DataError::format(path, "missing manifest"))
        }
        Err(e) => return Err(DataError::io(path, e)),
    };
    serde_json::from_str(&text).map_err(|e| DataError::format(path, format!("unreadable manifest: {e}")))
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))
}

/// Resolves an inventory entry, refusing paths that escape the directory.
pub(crate) fn inventory_path(dir: &Path, manifest: &Path, rel: &str) -> Result<PathBuf, DataError> {
    let p = Path::new(rel);
    if rel.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(DataError::manifest(manifest, format!("inventory path `{rel}` is not a plain relative path")));
    }
    Ok(dir.join(p))
}

fn f32s(points: &[Point3]) -> Vec<f32> {
    points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

fn write_array(path: &Path, h: usize, w: usize, ch: usize, payload: &Payload) -> Result<(), DataError> {
    array::write_file(path, h, w, ch, payload).map_err(|e| DataError::io(path, e))
}

fn read_f32(path: &Path, h: usize, w: usize, ch: usize) -> Result<Vec<f32>, DataError> {
    match array::read_file(path, &Shape::new(ElemType::F32, h, w, ch)).map_err(|e| DataError::array(path, e))? {
        Payload::F32(v) => Ok(v),
        _ => unreachable!("shape check fixes the element type"),
    }
}

fn read_u16(path: &Path, h: usize, w: usize) -> Result<Vec<u16>, DataError> {
    match array::read_file(path, &Shape::new(ElemType::U16, h, w, 1)).map_err(|e| DataError::array(path, e))? {
        Payload::U16(v) => Ok(v),
        _ => unreachable!("shape check fixes the element type"),
    }
}

fn read_bool(path: &Path, h: usize, w: usize) -> Result<Vec<bool>, DataError> {
    match array::read_file(path, &Shape::new(ElemType::U8, h, w, 1)).map_err(|e| DataError::array(path, e))? {
        Payload::U8(v) => v
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(DataError::format(path, format!("validity byte {other} is neither 0 nor 1"))),
            })
            .collect(),
        _ => unreachable!("shape check fixes the element type"),
    }
}

fn points_from(v: &[f32]) -> Vec<Point3> {
    v.chunks_exact(3)
        .map(|c| Point3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect()
}

fn bools(v: &[bool]) -> Payload {
    Payload::U8(v.iter().map(|&b| b as u8).collect())
}

/// Rounds every stored value to single precision, the on-disk precision.
pub fn quantize_scene(scene: &SceneData) -> SceneData {
    let q = |x: f64| x as f32 as f64;
    let mut out = scene.clone();
    for kf in &mut out.keyframes {
        let pts = kf.points.raw_points().iter().map(|p| p.map(q)).collect();
        kf.points = PointMap::new(kf.points.width(), kf.points.height(), pts, kf.points.valid_mask().to_vec())
            .expect("same shape");
    }
    for f in &mut out.correspondences {
        let flow = f.flows().iter().map(|v| v.map(q)).collect();
        let conf = f.confidences().iter().map(|&c| q(c)).collect();
        *f = CorrespondenceField::new(f.width(), f.height(), flow, conf, f.source_frame()).expect("same shape");
    }
    out
}

/// Rounds ground-truth geometry to single precision.
pub fn quantize_ground_truth(gt: &GroundTruth) -> GroundTruth {
    let mut out = gt.clone();
    for f in &mut out.frames {
        let pts = f.points.raw_points().iter().map(|p| p.map(|x| x as f32 as f64)).collect();
        f.points = PointMap::new(f.points.width(), f.points.height(), pts, f.points.valid_mask().to_vec())
            .expect("same shape");
    }
    out
}

/// Writes the scene, and the ground truth under `gt/` when given.
pub fn save_dataset(dir: &Path, scene: &SceneData, gt: Option<&GroundTruth>) -> Result<(), DataError> {
    create_dir(dir)?;
    let (w, h) = (scene.width(), scene.height());
    let frames: Vec<FrameEntry> = (0..scene.keyframe_count())
        .map(|k| FrameEntry {
            points: format!("frame_{k:04}.pts"),
            mask: format!("frame_{k:04}.msk"),
            valid: format!("frame_{k:04}.val"),
        })
        .collect();
    let pairs: Vec<PairEntry> = scene
        .correspondences
        .iter()
        .enumerate()
        .map(|(k, f)| PairEntry {
            source_frame: f.source_frame(),
            flow: format!("flow_{k:04}.flo2"),
            confidence: format!("conf_{k:04}.cnf"),
        })
        .collect();
    scene
        .keyframes
        .par_iter()
        .zip(frames.par_iter())
        .try_for_each(|(kf, e)| {
            write_array(&dir.join(&e.points), h, w, 3, &Payload::F32(f32s(kf.points.raw_points())))?;
            write_array(&dir.join(&e.mask), h, w, 1, &Payload::U16(kf.mask.labels().to_vec()))?;
            write_array(&dir.join(&e.valid), h, w, 1, &bools(kf.points.valid_mask()))
        })?;
    scene
        .correspondences
        .par_iter()
        .zip(pairs.par_iter())
        .try_for_each(|(f, e)| {
            let flow: Vec<f32> = f.flows().iter().flat_map(|v| [v.x as f32, v.y as f32]).collect();
            let conf: Vec<f32> = f.confidences().iter().map(|&c| c as f32).collect();
            write_array(&dir.join(&e.flow), h, w, 2, &Payload::F32(flow))?;
            write_array(&dir.join(&e.confidence), h, w, 1, &Payload::F32(conf))
        })?;
    if let Some(gt) = gt {
        save_ground_truth(&dir.join("gt"), gt)?;
    }
    write_json(
        &dir.join(MANIFEST),
        &SceneManifest {
            format: SCENE_FORMAT.into(),
            version: FORMAT_VERSION,
            width: w,
            height: h,
            keyframe_count: scene.keyframe_count(),
            scene_unit: scene.scene_unit.clone(),
            frames,
            correspondences: pairs,
            ground_truth: gt.map(|_| "gt".to_owned()),
        },
    )
}

pub fn save_scene(dir: &Path, scene: &SceneData) -> Result<(), DataError> {
    save_dataset(dir, scene, None)
}

fn check_header(manifest_path: &Path, format: &str, expected: &str, version: u32) -> Result<(), DataError> {
    if format != expected {
        return Err(DataError::format(manifest_path, format!("format tag `{format}`, expected `{expected}`")));
    }
    if version != FORMAT_VERSION {
        return Err(DataError::format(manifest_path, format!("unsupported version {version}")));
    }
    Ok(())
}

/// Reads a scene directory, zeroes confidences whose flow leaves the image,
/// and validates the result.
pub fn load_scene(dir: &Path) -> Result<SceneData, DataError> {
    let mpath = dir.join(MANIFEST);
    let m: SceneManifest = read_json(&mpath)?;
    check_header(&mpath, &m.format, SCENE_FORMAT, m.version)?;
    let (w, h) = (m.width, m.height);
    if w == 0 || h == 0 {
        return Err(DataError::manifest(&mpath, "resolution must be positive"));
    }
    if m.frames.len() != m.keyframe_count {
        return Err(DataError::manifest(
            &mpath,
            format!("declares {} keyframes but lists {} frames", m.keyframe_count, m.frames.len()),
        ));
    }
    let expected_pairs = m.keyframe_count.saturating_sub(1);
    if m.correspondences.len() != expected_pairs {
        return Err(DataError::manifest(
            &mpath,
            format!(
                "declares {} keyframes but lists {} correspondence fields (expected {expected_pairs})",
                m.keyframe_count,
                m.correspondences.len()
            ),
        ));
    }
    let keyframes: Vec<Keyframe> = m
        .frames
        .par_iter()
        .map(|e| {
            let pts = read_f32(&inventory_path(dir, &mpath, &e.points)?, h, w, 3)?;
            let labels = read_u16(&inventory_path(dir, &mpath, &e.mask)?, h, w)?;
            let valid = read_bool(&inventory_path(dir, &mpath, &e.valid)?, h, w)?;
            Ok(Keyframe {
                points: PointMap::new(w, h, points_from(&pts), valid).expect("shape checked"),
                mask: SegmentMask::new(w, h, labels).expect("shape checked"),
            })
        })
        .collect::<Result<_, DataError>>()?;
    let correspondences: Vec<CorrespondenceField> = m
        .correspondences
        .par_iter()
        .map(|e| {
            let flow = read_f32(&inventory_path(dir, &mpath, &e.flow)?, h, w, 2)?;
            let conf = read_f32(&inventory_path(dir, &mpath, &e.confidence)?, h, w, 1)?;
            let flow = flow.chunks_exact(2).map(|c| Vector2::new(c[0] as f64, c[1] as f64)).collect();
            let conf = conf.into_iter().map(f64::from).collect();
            let mut field = CorrespondenceField::new(w, h, flow, conf, e.source_frame).expect("shape checked");
            field.zero_out_of_image();
            Ok(field)
        })
        .collect::<Result<_, DataError>>()?;
    let scene = SceneData::from_parts(keyframes, correspondences, m.scene_unit)?;
    let diagnostics = validate_scene(&scene);
    if !diagnostics.is_empty() {
        return Err(DataError::Validation(diagnostics));
    }
    Ok(scene)
}

pub fn save_ground_truth(dir: &Path, gt: &GroundTruth) -> Result<(), DataError> {
    create_dir(dir)?;
    let (w, h) = gt
        .frames
        .first()
        .map_or((0, 0), |f| (f.points.width(), f.points.height()));
    let frames: Vec<GtFrameEntry> = (0..gt.frames.len())
        .map(|k| GtFrameEntry {
            points: format!("frame_{k:04}.pts"),
            labels: format!("frame_{k:04}.msk"),
            valid: format!("frame_{k:04}.val"),
            dynamic: format!("dyn_{k:04}.val"),
        })
        .collect();
    gt.frames.par_iter().zip(frames.par_iter()).try_for_each(|(f, e)| {
        write_array(&dir.join(&e.points), h, w, 3, &Payload::F32(f32s(f.points.raw_points())))?;
        write_array(&dir.join(&e.labels), h, w, 1, &Payload::U16(f.labels.labels().to_vec()))?;
        write_array(&dir.join(&e.valid), h, w, 1, &bools(f.points.valid_mask()))?;
        write_array(&dir.join(&e.dynamic), h, w, 1, &bools(&f.dynamic))
    })?;
    write_json(
        &dir.join(MANIFEST),
        &GroundTruthManifest {
            format: GROUND_TRUTH_FORMAT.into(),
            version: FORMAT_VERSION,
            width: w,
            height: h,
            frame_count: gt.frames.len(),
            frames,
            objects: gt
                .objects
                .iter()
                .map(|o| GtObjectEntry {
                    object_id: o.object_id,
                    diameter: o.diameter,
                    world_motion: o.world_motion.iter().map(pose_to_rows).collect(),
                })
                .collect(),
        },
    )
}

/// Loads ground truth from `dir`, or from `dir/gt` when `dir` is a dataset
/// root whose manifest points at it.
pub fn load_ground_truth(dir: &Path) -> Result<GroundTruth, DataError> {
    let mpath = dir.join(MANIFEST);
    let probe: serde_json::Value = read_json(&mpath)?;
    if probe.get("format").and_then(|f| f.as_str()) == Some(SCENE_FORMAT) {
        let scene: SceneManifest = read_json(&mpath)?;
        let rel = scene
            .ground_truth
            .ok_or_else(|| DataError::manifest(&mpath, "dataset has no ground truth"))?;
        return load_ground_truth(&inventory_path(dir, &mpath, &rel)?);
    }
    let m: GroundTruthManifest = read_json(&mpath)?;
    check_header(&mpath, &m.format, GROUND_TRUTH_FORMAT, m.version)?;
    let (w, h) = (m.width, m.height);
    if m.frames.len() != m.frame_count {
        return Err(DataError::manifest(
            &mpath,
            format!("declares {} frames but lists {}", m.frame_count, m.frames.len()),
        ));
    }
    let frames: Vec<GtFrame> = m
        .frames
        .par_iter()
        .map(|e| {
            let pts = read_f32(&inventory_path(dir, &mpath, &e.points)?, h, w, 3)?;
            let labels = read_u16(&inventory_path(dir, &mpath, &e.labels)?, h, w)?;
            let valid = read_bool(&inventory_path(dir, &mpath, &e.valid)?, h, w)?;
            let dynamic = read_bool(&inventory_path(dir, &mpath, &e.dynamic)?, h, w)?;
            Ok(GtFrame {
                points: PointMap::new(w, h, points_from(&pts), valid).expect("shape checked"),
                labels: SegmentMask::new(w, h, labels).expect("shape checked"),
                dynamic,
            })
        })
        .collect::<Result<_, DataError>>()?;
    let objects = m
        .objects
        .iter()
        .map(|o| {
            if o.world_motion.len() != m.frame_count {
                return Err(DataError::manifest(
                    &mpath,
                    format!("object {} has {} poses for {} frames", o.object_id, o.world_motion.len(), m.frame_count),
                ));
            }
            let world_motion = o
                .world_motion
                .iter()
                .map(|rows| {
                    pose_from_rows(rows)
                        .ok_or_else(|| DataError::format(&mpath, format!("object {} has an invalid pose", o.object_id)))
                })
                .collect::<Result<_, _>>()?;
            Ok(GtObject {
                object_id: o.object_id,
                diameter: o.diameter,
                world_motion,
            })
        })
        .collect::<Result<_, DataError>>()?;
    Ok(GroundTruth { frames, objects })
}

#[cfg(test)]
mod tests;
