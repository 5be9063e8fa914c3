use std::path::PathBuf;

use crate::placement::PlacementResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scenario violates {} invariant(s): {}", .0.len(), .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("upload can never complete: {0}")]
    NeverCompletes(String),

    #[error("sensor {id} is unreachable (spectral efficiency {se})")]
    Unreachable { id: u32, se: f64 },

    #[error("allocation is not feasible: {0}")]
    Infeasible(String),

    #[error("subproblem solver failed: {reason} (kkt residual {residual:.3e})")]
    Solver { reason: String, residual: f64 },

    #[error("placement did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<PlacementResult>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("scenario file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
