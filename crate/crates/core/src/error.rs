use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (non-finite input, non-positive width).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates its range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Vector or sequence lengths disagree.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An iterative solver hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The Armijo line search could not find an acceptable step.
    #[error("line search stalled at outer iteration {iteration}: objective {objective:e}, gradient norm {grad_norm:e}")]
    Stall {
        iteration: usize,
        objective: f64,
        grad_norm: f64,
    },

    /// An operation was called with inputs it cannot use.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            got,
        })
    }
}
