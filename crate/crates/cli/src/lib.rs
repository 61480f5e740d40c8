//! Batch driver for the glue4d backend: glue, remap, eval, synth and info
//! subcommands over on-disk scene directories.
//!
//! Exit codes:
//!
//! | code | class |
//! |-----:|-------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | usage (bad flags or arguments) |
//! | 3 | malformed input file |
//! | 4 | manifest inconsistent with its inventory |
//! | 5 | scene failed validation |
//! | 6 | filesystem error |
//! | 7 | invalid setting or config file |
//! | 8 | solver or motion segmentation failure |
//! | 9 | evaluation failure |
//! | 10 | time remapping failure |

pub mod commands;
pub mod config;
pub mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{CommonArgs, EvalArgs, MotionArgs, SolverArgs};
use std::ffi::OsString;
use std::path::PathBuf;

pub use config::{FileConfig, RunConfig, ENV_PREFIX};
pub use error::{CliError, ExitStatus};

#[derive(Parser, Debug)]
#[command(name = "glue4d", version, about = "Glue per-frame pointmaps into per-object 4D trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify static objects and solve every primitive pose.
    Glue(GlueArgs),
    /// Replay the solved scene at one or every keyframe.
    Remap(RemapArgs),
    /// Score a solved scene against its ground truth.
    Eval(EvalCmdArgs),
    /// Write a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Summarize a scene, reconstruction or ground-truth directory.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
pub struct GlueArgs {
    /// Scene directory.
    pub scene: PathBuf,
    /// Output directory: scene copy, solution.json and report.json.
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("when").required(true).args(["target", "all_times"])))]
pub struct RemapArgs {
    /// Solved scene directory.
    pub solved: PathBuf,
    /// Output reconstruction directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Target keyframe.
    #[arg(long)]
    pub target: Option<usize>,
    /// One reconstruction per keyframe.
    #[arg(long)]
    pub all_times: bool,
    #[command(flatten)]
    pub motion: MotionArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct EvalCmdArgs {
    /// Solved (or unsolved) scene directory.
    pub solved: PathBuf,
    /// Ground-truth directory, or a scene directory holding one
    /// [default: the scene directory].
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Write the full result as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[command(flatten)]
    pub motion: MotionArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Standard,
    Noisy,
    Chain,
    Performance,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["spec", "preset"])))]
pub struct SynthArgs {
    /// TOML scene description.
    pub spec: Option<PathBuf>,
    /// Built-in scene.
    #[arg(long, env = "GLUE4D_PRESET")]
    pub preset: Option<Preset>,
    /// Overrides the seed of the description.
    #[arg(long, env = "GLUE4D_SEED")]
    pub seed: Option<u64>,
    /// Output scene directory.
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub dir: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => ExitStatus::Success.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}
