use thiserror::Error;

use crate::squid::TuningSurface;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid parameters or integration settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition on the inputs does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical blow-up at step {step} (t = {time:e} s): {what}")]
    NumericalBlowup { step: usize, time: f64, what: String },

    #[error("grid error: {0}")]
    Grid(String),

    /// No admissible operating point was found; the evaluated surface is kept
    /// for inspection.
    #[error("operating-point tuning failed: {message}")]
    Tuning {
        message: String,
        surface: Box<TuningSurface>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
