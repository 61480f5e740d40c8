use super::array::{ElemType, Payload, Shape};
use super::{create_dir, inventory_path, read_json, write_json, DataError, FORMAT_VERSION, MANIFEST};
use crate::remap::{SceneReconstruction, WarpedFrame};
use crate::scene::{PointMap, SegmentMask};
use crate::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const RECONSTRUCTION_FORMAT: &str = "glue4d-reconstruction";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedEntry {
    pub source_frame: usize,
    pub points: String,
    pub valid: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub target_time: usize,
    pub frames: Vec<WarpedEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionManifest {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub targets: Vec<TargetEntry>,
}

/// Writes reconstructions in double precision so they reload bit for bit.
pub fn save_reconstructions(dir: &Path, recons: &[SceneReconstruction]) -> Result<(), DataError> {
    create_dir(dir)?;
    let (w, h) = recons.first().map_or((0, 0), |r| (r.width, r.height));
    let mut targets = Vec::with_capacity(recons.len());
    for r in recons {
        if (r.width, r.height) != (w, h) {
            return Err(DataError::Format {
                path: dir.to_owned(),
                detail: "reconstructions differ in resolution".into(),
            });
        }
        let entries: Vec<WarpedEntry> = r
            .frames
            .iter()
            .map(|f| {
                let stem = format!("t{:04}_s{:04}", r.target_time, f.source_frame);
                WarpedEntry {
                    source_frame: f.source_frame,
                    points: format!("{stem}.pts"),
                    valid: format!("{stem}.val"),
                    provenance: format!("{stem}.msk"),
                }
            })
            .collect();
        r.frames.par_iter().zip(entries.par_iter()).try_for_each(|(f, e)| {
            let pts = f.points.raw_points().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
            let valid = f.points.valid_mask().iter().map(|&b| b as u8).collect();
            let write = |name: &str, ch, payload: &Payload| {
                let path = dir.join(name);
                super::array::write_file(&path, h, w, ch, payload).map_err(|e| DataError::io(&path, e))
            };
            write(&e.points, 3, &Payload::F64(pts))?;
            write(&e.valid, 1, &Payload::U8(valid))?;
            write(&e.provenance, 1, &Payload::U16(f.provenance.labels().to_vec()))
        })?;
        targets.push(TargetEntry {
            target_time: r.target_time,
            frames: entries,
        });
    }
    write_json(
        &dir.join(MANIFEST),
        &ReconstructionManifest {
            format: RECONSTRUCTION_FORMAT.into(),
            version: FORMAT_VERSION,
            width: w,
            height: h,
            targets,
        },
    )
}

pub fn load_reconstructions(dir: &Path) -> Result<Vec<SceneReconstruction>, DataError> {
    let mpath = dir.join(MANIFEST);
    let m: ReconstructionManifest = read_json(&mpath)?;
    if m.format != RECONSTRUCTION_FORMAT || m.version != FORMAT_VERSION {
        return Err(DataError::Format {
            path: mpath,
            detail: format!("unsupported reconstruction format `{}` v{}", m.format, m.version),
        });
    }
    let (w, h) = (m.width, m.height);
    let read = |rel: &str, shape: Shape| -> Result<Payload, DataError> {
        let path = inventory_path(dir, &mpath, rel)?;
        super::array::read_file(&path, &shape).map_err(|e| DataError::array(&path, e))
    };
    m.targets
        .iter()
        .map(|t| {
            let frames = t
                .frames
                .par_iter()
                .map(|e| {
                    let Payload::F64(pts) = read(&e.points, Shape::new(ElemType::F64, h, w, 3))? else {
                        unreachable!("shape check fixes the element type")
                    };
                    let Payload::U8(valid) = read(&e.valid, Shape::new(ElemType::U8, h, w, 1))? else {
                        unreachable!("shape check fixes the element type")
                    };
                    let Payload::U16(labels) = read(&e.provenance, Shape::new(ElemType::U16, h, w, 1))? else {
                        unreachable!("shape check fixes the element type")
                    };
                    let points = pts.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
                    let valid = valid.into_iter().map(|b| b != 0).collect();
                    Ok(WarpedFrame {
                        source_frame: e.source_frame,
                        points: PointMap::new(w, h, points, valid).expect("shape checked"),
                        provenance: SegmentMask::new(w, h, labels).expect("shape checked"),
                    })
                })
                .collect::<Result<_, DataError>>()?;
            Ok(SceneReconstruction {
                target_time: t.target_time,
                width: w,
                height: h,
                frames,
            })
        })
        .collect()
}
