use thiserror::Error;

/// Errors raised by the circuit models and the signal toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("angular frequency must be > 0 (DC is outside the phasor model), got {0} rad/s")]
    NonPositiveFrequency(f64),

    #[error("degenerate delta: |z_ab + z_bc + z_ca| = {magnitude:e} is below epsilon")]
    DegenerateDelta { magnitude: f64 },

    #[error("singular matrix: pivot {index} has magnitude {magnitude:e}")]
    Singular { index: usize, magnitude: f64 },

    #[error("near-zero denominator `{what}`: magnitude {magnitude:e}")]
    NearZero { what: &'static str, magnitude: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("at {frequency_hz} Hz: {source}")]
    AtFrequency {
        frequency_hz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn at_frequency(self, frequency_hz: f64) -> Self {
        Error::AtFrequency {
            frequency_hz,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by the numbers rather than by malformed input:
    /// singular systems, near-zero denominators and infeasible designs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateDelta { .. }
            | Error::Singular { .. }
            | Error::NearZero { .. }
            | Error::Infeasible(_) => true,
            Error::AtFrequency { source, .. } | Error::Stage { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
