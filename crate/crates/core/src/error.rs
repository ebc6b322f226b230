use thiserror::Error;

/// Errors raised by the numerical kernels, the simulator and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The parameters select a regime in which the requested quantity is undefined.
    #[error("regime error: {0}")]
    Regime(String),

    /// An enumeration or simulation size exceeds the supported bound.
    #[error("size error: {0}")]
    Size(String),

    /// A table would not fit in the configured memory budget.
    #[error("resource error: {0}")]
    Resource(String),

    /// An experiment description is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The ODE integrator did not resolve the solution to the requested accuracy.
    #[error("step-size error: Richardson estimate {estimate:.3e} exceeds {limit:.3e}")]
    StepSize { estimate: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn regime<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Regime(msg.into()))
}
