use thiserror::Error;

/// Errors raised by the beamforming pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("matrix contains non-finite entries ({op})")]
    NonFinite { op: &'static str },

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} (threshold {threshold:e})")]
    NotPositiveDefinite { eigenvalue: f64, threshold: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("matrix is rank deficient in {op} (|R_ii| = {pivot:e} at column {column})")]
    RankDeficient { op: &'static str, column: usize, pivot: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown group id {0}")]
    UnknownGroup(usize),

    #[error("RF chain {chain} has no connected antenna")]
    EmptyRfChain { chain: usize },

    #[error("{dim} is not divisible by {by}")]
    NotDivisible { dim: usize, by: usize },

    #[error("all {candidates} dynamic connection candidates left an RF chain unconnected; increase N_iter")]
    CandidatesExhausted { candidates: usize },

    #[error("block length {n} is shorter than the channel memory {l}")]
    BlockLength { n: usize, l: usize },

    #[error("frequency bin {bin} has a rank-deficient intra-group channel")]
    SingularBin { bin: usize },

    #[error("residual interference power {value:e} is negative beyond rounding")]
    NegativePower { value: f64 },

    #[error("pilot matrix is rank deficient after pruning (T = {pilot_len}); use longer pilots")]
    PilotDesign { pilot_len: usize },

    #[error("channel has zero energy; nMSE is undefined")]
    ZeroChannelEnergy,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
