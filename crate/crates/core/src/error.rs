use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by every stage of the pipeline.
///
/// `exit_code` maps each variant onto the CLI convention: 2 for
/// configuration problems, 3 for bad input data, 4 for numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for population of {n}")]
    Index { index: usize, n: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{0}` is not categorical")]
    NotCategorical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid sampling design: {0}")]
    Design(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("weight error: {0}")]
    Weight(String),

    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("network generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("sampling stalled at {achieved} of {target} members")]
    Stall { achieved: usize, target: usize },

    #[error("bootstrap method failed: {0}")]
    Method(String),

    #[error("replicate construction failed after {0} attempts")]
    Replicate(usize),

    #[error("variance error: {0}")]
    Variance(String),

    #[error("repair error for member {member}: {reason}")]
    Repair { member: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Design(_) | Error::Json(_) => 2,
            Error::Index { .. }
            | Error::UnknownAttribute(_)
            | Error::NotCategorical(_)
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::Repair { .. }
            | Error::Io(_)
            | Error::Csv(_) => 3,
            Error::Weight(_)
            | Error::Undefined(_)
            | Error::Numeric(_)
            | Error::Generation { .. }
            | Error::Calibration(_)
            | Error::Stall { .. }
            | Error::Method(_)
            | Error::Replicate(_)
            | Error::Variance(_) => 4,
        }
    }

    /// True for the "estimate undefined" status produced by degenerate samples.
    pub fn is_undefined(&self) -> bool {
        matches!(self, Error::Undefined(_))
    }
}
