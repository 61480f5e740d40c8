use crate::dataio::DataError;
use crate::eval::EvalError;
use crate::lie::LieError;
use crate::motion::MotionError;
use crate::remap::RemapError;
use crate::scene::SceneError;
use crate::solver::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Remap(#[from] RemapError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}
