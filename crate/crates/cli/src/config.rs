//! Settings layered as defaults < config file < environment < flags.

use crate::error::CliError;
use clap::Args;
use glue4d_core::eval::EvalConfig;
use glue4d_core::motion::MotionSegConfig;
use glue4d_core::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Prefix of every environment variable the CLI reads.
pub const ENV_PREFIX: &str = "GLUE4D_";

/// Contents of a TOML settings file. Every table is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub solver: SolverConfig,
    pub motion: MotionSegConfig,
    pub eval: EvalConfig,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_owned(),
            detail: e.to_string(),
        })
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// TOML settings file with optional [solver], [motion] and [eval] tables.
    #[arg(long, env = "GLUE4D_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "GLUE4D_WORKERS")]
    pub workers: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SolverArgs {
    /// Gauss-Newton iteration cap per object.
    #[arg(long, env = "GLUE4D_MAX_ITERS")]
    pub max_iters: Option<usize>,
    /// Huber knee in scene units [default: 1% of the scene scale].
    #[arg(long, env = "GLUE4D_HUBER_DELTA")]
    pub huber_delta: Option<f64>,
    /// Static residual threshold in scene units [default: 0.5% of the scene scale].
    #[arg(long, env = "GLUE4D_STATIC_THRESH")]
    pub static_thresh: Option<f64>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct MotionArgs {
    /// Contact inflation factor of oriented boxes.
    #[arg(long, env = "GLUE4D_ALPHA")]
    pub alpha: Option<f64>,
    /// Translational velocity std in scene units [default: 2% of the scene scale].
    #[arg(long, env = "GLUE4D_SIGMA_TAU")]
    pub sigma_tau: Option<f64>,
    /// Rotational velocity std in radians.
    #[arg(long, env = "GLUE4D_SIGMA_PSI")]
    pub sigma_psi: Option<f64>,
    /// Skip parent assignment and extrapolation of occluded objects.
    #[arg(long)]
    pub no_permanence: bool,
}

#[derive(Args, Clone, Debug, Default)]
pub struct EvalArgs {
    /// F-score distance threshold in scene units.
    #[arg(long, env = "GLUE4D_THRESHOLD")]
    pub threshold: Option<f64>,
    /// Keyframes per evaluation chunk.
    #[arg(long, env = "GLUE4D_CHUNK_LEN")]
    pub chunk_len: Option<usize>,
}

/// Fully merged settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub motion: MotionSegConfig,
    pub permanence: bool,
    pub eval: EvalConfig,
    pub workers: Option<usize>,
    pub quiet: bool,
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(common: &CommonArgs) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let workers = common.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::config("workers", "must be positive"));
        }
        Ok(Self {
            solver: file.solver,
            motion: file.motion,
            permanence: true,
            eval: file.eval,
            workers,
            quiet: common.quiet,
            inputs: Vec::new(),
            output: None,
        })
    }

    pub fn with_solver(mut self, a: &SolverArgs) -> Self {
        if let Some(v) = a.max_iters {
            self.solver.max_iterations = v;
        }
        if a.huber_delta.is_some() {
            self.solver.huber_delta = a.huber_delta;
        }
        if a.static_thresh.is_some() {
            self.solver.static_residual_threshold = a.static_thresh;
        }
        self
    }

    pub fn with_motion(mut self, a: &MotionArgs) -> Self {
        if let Some(v) = a.alpha {
            self.motion.alpha = v;
        }
        if a.sigma_tau.is_some() {
            self.motion.sigma_tau = a.sigma_tau;
        }
        if let Some(v) = a.sigma_psi {
            self.motion.sigma_psi = v;
        }
        self.permanence = !a.no_permanence;
        self
    }

    pub fn with_eval(mut self, a: &EvalArgs) -> Self {
        if let Some(v) = a.threshold {
            self.eval.threshold = v;
        }
        if let Some(v) = a.chunk_len {
            self.eval.chunk_length = v;
        }
        self
    }

    /// Records the paths and checks that every input exists and the output
    /// is not an existing file.
    pub fn with_paths(mut self, inputs: &[&Path], output: Option<&Path>) -> Result<Self, CliError> {
        for p in inputs {
            if !p.exists() {
                return Err(CliError::io(p, std::io::ErrorKind::NotFound.into()));
            }
        }
        if let Some(out) = output {
            if out.is_file() {
                return Err(CliError::io(out, std::io::Error::other("output path is an existing file")));
            }
        }
        self.inputs = inputs.iter().map(|p| p.to_path_buf()).collect();
        self.output = output.map(Path::to_path_buf);
        Ok(self)
    }
}
