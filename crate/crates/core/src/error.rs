use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moment of order {order} diverges for tail exponent {alpha}")]
    DivergentMoment { order: f64, alpha: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no asymptotic prediction for {statistic} under {kernel} thinning")]
    NoPrediction {
        statistic: &'static str,
        kernel: &'static str,
    },

    #[error("degenerate estimator input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
