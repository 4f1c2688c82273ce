use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: shape mismatches, inconsistent specs, bad domains.
    #[error("configuration error: {0}")]
    Config(String),

    /// A training-time failure, e.g. a non-finite residual. Carries enough
    /// context to identify the offending collocation point.
    #[error("training error: {message} (term {term}, point {point_index})")]
    Training {
        message: String,
        term: &'static str,
        point_index: usize,
    },

    /// Numerical failure outside training (quadrature non-convergence,
    /// degenerate norms, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Failure while parsing a config file, expression, or CSV.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
