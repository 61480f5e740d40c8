use glue4d_core::dataio::DataError;
use glue4d_core::eval::EvalError;
use glue4d_core::motion::MotionError;
use glue4d_core::remap::RemapError;
use glue4d_core::solver::SolverError;
use glue4d_core::synth::ConfigError;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Process exit status; each error class owns exactly one code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ExitStatus {
    Success = 0,
    Internal = 1,
    Usage = 2,
    Format = 3,
    Manifest = 4,
    Validation = 5,
    Io = 6,
    Config = 7,
    Solver = 8,
    Eval = 9,
    Remap = 10,
}

impl ExitStatus {
    pub const ALL: [ExitStatus; 11] = [
        ExitStatus::Success,
        ExitStatus::Internal,
        ExitStatus::Usage,
        ExitStatus::Format,
        ExitStatus::Manifest,
        ExitStatus::Validation,
        ExitStatus::Io,
        ExitStatus::Config,
        ExitStatus::Solver,
        ExitStatus::Eval,
        ExitStatus::Remap,
    ];

    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error in {}: {detail}", path.display())]
    ConfigFile { path: PathBuf, detail: String },
    #[error("invalid setting `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Remap(#[from] RemapError),
    #[error(transparent)]
    Synth(#[from] ConfigError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::ConfigFile { .. } | CliError::Config { .. } | CliError::Synth(_) => ExitStatus::Config,
            CliError::Io { .. } => ExitStatus::Io,
            CliError::Internal(_) => ExitStatus::Internal,
            CliError::Data(e) => match e {
                DataError::Format { .. } => ExitStatus::Format,
                DataError::Manifest { .. } => ExitStatus::Manifest,
                DataError::Scene(_) | DataError::Validation(_) => ExitStatus::Validation,
                DataError::Io { .. } => ExitStatus::Io,
            },
            CliError::Solver(e) => match e {
                SolverError::InvalidConfig { .. } => ExitStatus::Config,
                SolverError::InvalidScene(_) => ExitStatus::Validation,
            },
            CliError::Motion(e) => match e {
                MotionError::InvalidConfig { .. } => ExitStatus::Config,
                MotionError::Lie(_) => ExitStatus::Solver,
                MotionError::Remap(_) => ExitStatus::Remap,
            },
            CliError::Eval(e) => match e {
                EvalError::InvalidConfig { .. } => ExitStatus::Config,
                EvalError::Remap(_) => ExitStatus::Remap,
                _ => ExitStatus::Eval,
            },
            CliError::Remap(_) => ExitStatus::Remap,
        }
    }
}
