//! Subcommand bodies. Each returns after writing every output, so a nonzero
//! exit never leaves a half-reported success on stdout.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{Command, EvalCmdArgs, GlueArgs, InfoArgs, Preset, RemapArgs, SynthArgs};
use glue4d_core::dataio::{
    apply_solution, load_ground_truth, DataError, load_reconstructions, load_scene, load_solution, save_dataset,
    save_reconstructions, save_solution, Solution, GROUND_TRUTH_FORMAT, MANIFEST, RECONSTRUCTION_FORMAT,
    SCENE_FORMAT,
};
use glue4d_core::eval::evaluate_sequence;
use glue4d_core::motion::{apply_object_permanence, MotionReport};
use glue4d_core::remap::remap_scene;
use glue4d_core::scene::{GroundTruth, SceneData};
use glue4d_core::solver::solve;
use glue4d_core::synth::{self, SynthConfig};
use serde::Serialize;
use std::path::Path;

pub const SOLUTION_FILE: &str = "solution.json";
pub const REPORT_FILE: &str = "report.json";
pub const PERMANENCE_FILE: &str = "permanence.json";
pub const SYNTH_FILE: &str = "synth.toml";

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Glue(a) => {
            let run = RunConfig::new(&a.common)?
                .with_solver(&a.solver)
                .with_paths(&[&a.scene], Some(&a.out))?;
            in_pool(run.workers, || cmd_glue(&a, &run))
        }
        Command::Remap(a) => {
            let run = RunConfig::new(&a.common)?
                .with_motion(&a.motion)
                .with_paths(&[&a.solved], Some(&a.out))?;
            in_pool(run.workers, || cmd_remap(&a, &run))
        }
        Command::Eval(a) => {
            let gt = a.gt.clone().unwrap_or_else(|| a.solved.clone());
            let run = RunConfig::new(&a.common)?
                .with_motion(&a.motion)
                .with_eval(&a.eval)
                .with_paths(&[&a.solved, &gt], a.report.as_deref())?;
            in_pool(run.workers, || cmd_eval(&a, &gt, &run))
        }
        Command::Synth(a) => {
            let inputs: Vec<&Path> = a.spec.iter().map(|p| p.as_path()).collect();
            let run = RunConfig::new(&a.common)?.with_paths(&inputs, Some(&a.out))?;
            in_pool(run.workers, || cmd_synth(&a, &run))
        }
        Command::Info(a) => cmd_info(&a),
    }
}

fn in_pool<R>(workers: Option<usize>, f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError>
where
    R: Send,
{
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn manifest_field(dir: &Path, key: &str) -> Result<Option<serde_json::Value>, CliError> {
    let path = dir.join(MANIFEST);
    let format_err = |detail: String| DataError::Format {
        path: path.clone(),
        detail,
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(format_err("manifest is missing".into()).into()),
        Err(e) => return Err(CliError::io(&path, e)),
    };
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| format_err(e.to_string()))?;
    Ok(value.get(key).filter(|v| !v.is_null()).cloned())
}

/// Ground truth bundled with a scene directory, if it declares one.
fn bundled_ground_truth(dir: &Path) -> Result<Option<GroundTruth>, CliError> {
    match manifest_field(dir, "ground_truth")? {
        Some(_) => Ok(Some(load_ground_truth(dir)?)),
        None => Ok(None),
    }
}

/// Loads a scene with its solution when present, then applies object
/// permanence when enabled.
pub fn load_solved(dir: &Path, run: &RunConfig) -> Result<(SceneData, Option<MotionReport>), CliError> {
    let mut scene = load_scene(dir)?;
    let sol = dir.join(SOLUTION_FILE);
    if sol.exists() {
        apply_solution(&mut scene, &load_solution(&sol)?, &sol)?;
    }
    let report = if run.permanence {
        Some(apply_object_permanence(&mut scene, &run.motion)?)
    } else {
        None
    };
    Ok((scene, report))
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

pub fn cmd_glue(a: &GlueArgs, run: &RunConfig) -> Result<(), CliError> {
    let mut scene = load_scene(&a.scene)?;
    let gt = bundled_ground_truth(&a.scene)?;
    let report = solve(&mut scene, &run.solver)?;
    create_dir(&a.out)?;
    if !same_dir(&a.scene, &a.out) {
        save_dataset(&a.out, &scene, gt.as_ref())?;
    }
    save_solution(&a.out.join(SOLUTION_FILE), &Solution::from_scene(&scene))?;
    write_json(&a.out.join(REPORT_FILE), &report)?;
    if !run.quiet {
        for o in &report.objects {
            let kind = if o.static_flag { "static" } else { "dynamic" };
            println!(
                "object {}: {kind}, {:?}, {} iterations, cost {:.3e}",
                o.object_id, o.termination, o.iterations, o.final_cost
            );
        }
        let statics = report.objects.iter().filter(|o| o.static_flag).count();
        println!("{statics} static, {} dynamic", report.objects.len() - statics);
    }
    Ok(())
}

pub fn cmd_remap(a: &RemapArgs, run: &RunConfig) -> Result<(), CliError> {
    let (scene, motion) = load_solved(&a.solved, run)?;
    let targets: Vec<usize> = match a.target {
        Some(t) if !a.all_times => vec![t],
        _ => (0..scene.keyframe_count()).collect(),
    };
    let recons = targets
        .iter()
        .map(|&t| remap_scene(&scene, t))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(&a.out)?;
    save_reconstructions(&a.out, &recons)?;
    if let Some(m) = &motion {
        write_json(&a.out.join(PERMANENCE_FILE), m)?;
    }
    if !run.quiet {
        if let Some(m) = &motion {
            for asg in m.assignments.iter().filter(|x| x.parent.is_some()) {
                let parent = asg.parent.expect("filtered");
                println!("object {} follows {parent} after keyframe {}", asg.object_id, asg.contact_time);
            }
        }
        println!("{} reconstruction(s) written to {}", recons.len(), a.out.display());
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalCmdArgs, gt_dir: &Path, run: &RunConfig) -> Result<(), CliError> {
    let (scene, _) = load_solved(&a.solved, run)?;
    let gt = load_ground_truth(gt_dir)?;
    let result = evaluate_sequence(&scene, &gt, &run.eval)?;
    if let Some(path) = &a.report {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_json(path, &result)?;
    }
    if !run.quiet {
        println!(
            "threshold {} chunk_len {} dynamic_only {}",
            result.threshold, result.chunk_length, result.dynamic_only
        );
        for c in &result.chunks {
            println!(
                "chunk {}..={}: precision {:.4} recall {:.4} fscore {:.4}",
                c.start, c.end, c.precision, c.recall, c.fscore
            );
        }
        println!(
            "precision {:.4} recall {:.4} fscore {:.4}",
            result.precision, result.recall, result.fscore
        );
    }
    Ok(())
}

pub fn preset_config(p: Preset) -> SynthConfig {
    match p {
        Preset::Standard => synth::standard_benchmark(),
        Preset::Noisy => synth::noisy_benchmark(),
        Preset::Chain => synth::three_body_chain(),
        Preset::Performance => synth::performance_scene(),
    }
}

pub fn load_synth_config(path: &Path) -> Result<SynthConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.to_owned(),
        detail: e.to_string(),
    })
}

pub fn cmd_synth(a: &SynthArgs, run: &RunConfig) -> Result<(), CliError> {
    let mut config = match (&a.spec, a.preset) {
        (Some(path), _) => load_synth_config(path)?,
        (None, Some(p)) => preset_config(p),
        (None, None) => return Err(CliError::Usage("either a description file or --preset is required".into())),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let (scene, gt) = synth::generate(&config)?;
    create_dir(&a.out)?;
    save_dataset(&a.out, &scene, Some(&gt))?;
    let text = toml::to_string(&config).map_err(|e| CliError::Internal(e.to_string()))?;
    let path = a.out.join(SYNTH_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    if !run.quiet {
        println!(
            "{}x{}, {} keyframes, {} objects written to {}",
            config.width,
            config.height,
            config.keyframe_count,
            config.objects.len(),
            a.out.display()
        );
    }
    Ok(())
}

pub fn cmd_info(a: &InfoArgs) -> Result<(), CliError> {
    let format = manifest_field(&a.dir, "format")?;
    match format.as_ref().and_then(|f| f.as_str()) {
        Some(SCENE_FORMAT) => {
            let run = RunConfig {
                permanence: false,
                ..RunConfig::new(&Default::default())?
            };
            let (scene, _) = load_solved(&a.dir, &run)?;
            println!(
                "scene {}x{}, {} keyframes, unit {}",
                scene.width(),
                scene.height(),
                scene.keyframe_count(),
                scene.scene_unit
            );
            println!("scene scale {:.6}", scene.scene_scale());
            for o in &scene.objects {
                let frames: Vec<String> = o.observed_keyframes().map(|k| k.to_string()).collect();
                let mut line = format!("object {}: keyframes [{}]", o.object_id, frames.join(", "));
                if o.is_static {
                    line.push_str(", static");
                }
                if let Some(p) = o.parent {
                    line.push_str(&format!(", parent {p}"));
                }
                println!("{line}");
            }
            println!("solution: {}", if a.dir.join(SOLUTION_FILE).exists() { "yes" } else { "no" });
            println!("ground truth: {}", if bundled_ground_truth(&a.dir)?.is_some() { "yes" } else { "no" });
        }
        Some(RECONSTRUCTION_FORMAT) => {
            for r in load_reconstructions(&a.dir)? {
                let points: usize = r.frames.iter().map(|f| f.points.valid_count()).sum();
                println!("target {}: {} source frames, {points} points", r.target_time, r.frames.len());
            }
        }
        Some(GROUND_TRUTH_FORMAT) => {
            let gt = load_ground_truth(&a.dir)?;
            println!("ground truth, {} frames", gt.frames.len());
            for o in &gt.objects {
                let kind = if o.is_dynamic() { "dynamic" } else { "static" };
                println!("object {}: {kind}, diameter {:.6}", o.object_id, o.diameter);
            }
        }
        other => {
            return Err(DataError::Format {
                path: a.dir.join(MANIFEST),
                detail: format!("unknown format tag {other:?}"),
            }
            .into())
        }
    }
    Ok(())
}
