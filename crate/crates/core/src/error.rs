use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program solver failed: {0}")]
    LpNumerical(&'static str),

    #[error("invalid filter specification: {0}")]
    InvalidSpec(String),

    #[error("no decoy candidates for coefficient {value} with bounds [{lower}, {upper}] at {mbw} bits")]
    EmptyCandidateSet { value: i64, lower: i64, upper: i64, mbw: u32 },

    #[error("need {needed} decoys for coefficient {value} but only {available} candidates remain")]
    InsufficientCandidates { value: i64, needed: usize, available: usize },

    #[error("p must be at least N (p = {p}, N = {n})")]
    TooFewKeyBits { p: usize, n: usize },

    #[error("inconsistent decoy assignment: {0}")]
    InconsistentAssignment(String),

    #[error("no consistent value for bit {bit} of the constant at select {select}, key slice {slice}")]
    NoConsistentBit { select: usize, slice: u64, bit: u32 },

    #[error("recovered constant {value} at select {select}, key slice {slice} fails verification")]
    VerificationMismatch { select: usize, slice: u64, value: i64 },

    #[error("every recovered set has two elements; no decoy-selection signal")]
    Inconclusive,

    #[error("requested {requested} wrong keys but only {available} exist within the distance bound")]
    TooManyWrongKeys { requested: usize, available: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
