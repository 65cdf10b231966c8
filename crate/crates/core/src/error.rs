use thiserror::Error;

use crate::network::BusId;
use crate::phase::Phase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid phase `{0}`")]
    InvalidPhase(String),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("segment {from} -> {to} closes a cycle")]
    Cycle { from: BusId, to: BusId },
    #[error("bus {0} is not connected to the source")]
    Disconnected(BusId),
    #[error("network has no source bus")]
    MissingSource,
    #[error("network has more than one source bus ({0} and {1})")]
    MultipleSources(BusId, BusId),
    #[error("phase {phase} is referenced on bus {bus}, which lacks it ({context})")]
    PhaseMismatch {
        bus: BusId,
        phase: Phase,
        context: String,
    },
    #[error("no actors defined")]
    NoActors,
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("covariance is not positive semi-definite (most negative eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
    #[error("non-finite result: {0}")]
    NonFinite(String),
    #[error("degenerate VIS normalization at observation {bus}{phase}")]
    DegenerateNormalization { bus: BusId, phase: Phase },
    #[error("load flow did not converge after {iterations} iterations (mismatch {mismatch:e} VA)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("monte-carlo sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::SingularCovariance(_)
                | Error::NonFinite(_)
                | Error::DegenerateNormalization { .. }
                | Error::NonConvergence { .. }
                | Error::Sample { .. }
        )
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}
