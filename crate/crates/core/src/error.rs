use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("simulation diverged at t = {t}")]
    SimulationDiverged { t: f64 },

    #[error("L1 controller diverged at t = {t}")]
    ControllerDiverged { t: f64 },

    #[error("Q_uu not positive definite at step {step} even with regularization {mu}")]
    RegularizationFailure { step: usize, mu: f64 },

    #[error("line search rejected every step size")]
    LineSearchFailure,

    #[error("trajectory optimizer diverged at iteration {iteration}")]
    SolverDiverged { iteration: usize },

    #[error("controller synthesis failed: {0}")]
    Synthesis(String),

    #[error("QP infeasible: barrier constraint violated by {margin} at best")]
    Infeasible { margin: f64 },
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
