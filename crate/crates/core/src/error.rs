use thiserror::Error;

use crate::forward::JumpPath;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building models, simulating paths or
/// evaluating weights.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model definition: {0}")]
    Model(String),

    #[error("reaction {reaction}: intensity evaluated to {value} (must be finite and >= 0)")]
    NegativeIntensity { reaction: usize, value: f64 },

    #[error("reaction {reaction} has a time-dependent intensity; this sampler needs time-homogeneous rates")]
    TimeDependentRate { reaction: usize },

    #[error("reaction {reaction} is time-dependent but declares no upper bound")]
    MissingBound { reaction: usize },

    #[error("reaction {reaction}: intensity {value} at t={time} exceeds thinning bound {bound}")]
    InvalidBound { reaction: usize, time: f64, value: f64, bound: f64 },

    #[error("event budget of {max_events} exhausted before the horizon")]
    ExplosionGuard { max_events: usize, partial: Box<JumpPath> },

    #[error("invalid observation scheme: {0}")]
    Scheme(String),

    #[error("observation {0}: noise covariance is singular")]
    SingularC(usize),

    #[error("observation {0}: L a L' is singular, the distance metric is undefined")]
    SingularMetric(usize),

    #[error("guiding density covariance is singular at t={time}")]
    SingularCovariance { time: f64 },

    #[error("guiding term vanishes at the current state (t={time}); the guided rate is undefined")]
    EvaluationAtMiss { time: f64 },

    #[error("ODE integration failed: {0}")]
    OdeFailure(String),

    #[error("delta window requested for a reaction whose guided rate is not increasing")]
    WrongTrend,

    #[error("importance weight is not finite: {0}")]
    NonFiniteWeight(String),

    #[error("number of replicates must be positive")]
    InvalidReplicates,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Whether this error comes from the numerics rather than the model or
    /// configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InvalidBound { .. }
                | Error::ExplosionGuard { .. }
                | Error::SingularCovariance { .. }
                | Error::EvaluationAtMiss { .. }
                | Error::OdeFailure(_)
                | Error::NonFiniteWeight(_)
                | Error::NegativeIntensity { .. }
        )
    }
}
