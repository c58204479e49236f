use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A problem or experiment file could not be read as the expected schema.
    #[error("parse error: {0}")]
    Parse(String),

    /// A problem or experiment description is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A coefficient or payoff produced a NaN or infinite value.
    #[error("non-finite value in {what} at {location}")]
    NonFinite { what: String, location: String },

    #[error("CFL condition violated: dt = {dt} exceeds the stable bound {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("fixed-point iteration stopped after {iterations} iterations with residual {residual}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        residual_field: Vec<f64>,
    },

    #[error("scenario tree needs about {estimate} nodes, budget is {budget}")]
    NodeBudget { estimate: u128, budget: usize },

    #[error("martingale representation failed at node {node}: {reason}")]
    Representation { node: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for the `target-lab` binary: 2 parse, 3 validation,
    /// 4 numerical failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Domain(_) | Error::Config(_) => 3,
            Error::NonFinite { .. }
            | Error::Cfl { .. }
            | Error::NonConvergence { .. }
            | Error::NodeBudget { .. }
            | Error::Representation { .. } => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

/// Returns `value` unchanged when finite, otherwise a [`Error::NonFinite`].
pub(crate) fn finite(value: f64, what: &str, location: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
            location: location(),
        })
    }
}
