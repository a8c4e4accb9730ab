use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid inner-product space: {0}")]
    InvalidInnerSpace(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tolerance policy: {0}")]
    InvalidTolerance(String),

    #[error("basis vectors are linearly dependent (rank {rank} < {count})")]
    DependentBasis { rank: usize, count: usize },

    #[error("subspace is not a complement of the kernel: {0}")]
    NotAComplement(String),

    #[error("factor {factor} is not admissible for this map ({reason})")]
    FactorNotAdmissible { factor: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("map evaluation failed at {point:?}: {reason}")]
    MapEvaluation { point: Vec<f64>, reason: String },

    #[error("unknown gallery fixture `{0}`")]
    UnknownFixture(String),

    #[error("expression parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
