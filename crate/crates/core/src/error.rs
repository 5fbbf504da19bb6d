use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates an invariant (bad bounds, unstable time step, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A quadrature did not reach the requested tolerance.
    #[error("quadrature failed: estimated error {estimate:e} exceeds tolerance {tolerance:e} ({context})")]
    Quadrature { estimate: f64, tolerance: f64, context: String },

    /// The explicit stepper produced non-finite values.
    #[error("numerical blow-up at t = {time}")]
    BlowUp { time: f64 },

    /// An iterative method stopped before meeting its criterion.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// The thinning bound was exceeded by the intensity.
    #[error("intensity {value} exceeds thinning bound {bound} at {location:?}")]
    BoundViolated { value: f64, bound: f64, location: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
