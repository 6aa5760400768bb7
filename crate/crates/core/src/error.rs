use std::path::PathBuf;

/// Errors raised anywhere in the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory {traj} diverged at t = {time}")]
    Divergence { traj: u64, time: f64 },

    #[error("{diverged} of {total} trajectories diverged (first: trajectory {first_traj} at t = {first_time})")]
    EnsembleDiverged {
        diverged: usize,
        total: usize,
        first_traj: u64,
        first_time: f64,
    },

    #[error("time {0} is not on the recorded grid")]
    OffGrid(f64),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("phase undefined: {near_zero} of {total} trajectories have a near-zero amplitude")]
    PhaseUndefined { near_zero: usize, total: usize },

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("histogram error: {0}")]
    Histogram(String),

    #[error("sizing error: {what} needs {required_bytes} bytes, budget is {budget_bytes}")]
    Sizing {
        what: String,
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("zero eigenvalue is {multiplicity}-fold degenerate")]
    DegenerateSteadyState { multiplicity: usize },

    #[error("eigensolver did not converge after {iterations} restarts (worst residual {worst_residual:e})")]
    EigenNonConvergence {
        iterations: usize,
        worst_residual: f64,
    },

    #[error("dense eigensolver failed: {0}")]
    DenseEigen(String),

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Sizing { .. })
    }
}
