use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("nonlinear solver did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("time-periodic cell solve did not converge in {sweeps} period sweeps (last gap {gap:e})")]
    PeriodicGap { sweeps: usize, gap: f64, history: Vec<f64> },

    #[error("linear solver failed: {0}")]
    Linear(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("xi = {xi:?} lies outside the tabulated box; tabulate over a larger box")]
    OutOfRange { xi: Vec<f64> },

    #[error("cell solve failed at lattice node {node:?}: {source}")]
    Node {
        node: Vec<f64>,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("cell solution for xi = {0:?} is not cached and solving is disabled")]
    Unavailable(Vec<f64>),

    #[error("corrector cache needs {needed} distinct cell solves, budget is {budget}")]
    Resource { needed: usize, budget: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when the error came out of a numerical solve rather than bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Convergence { .. } | Error::PeriodicGap { .. } | Error::Linear(_) => true,
            Error::Step { source, .. } | Error::Node { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
