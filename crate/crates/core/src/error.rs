use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown tensor factor `{0}`")]
    UnknownFactor(String),

    #[error("odd cat state is undefined at alpha = 0")]
    OddCatAtOrigin,

    #[error("truncation overflow: top-level population {tail:.3e} exceeds tolerance {tol:.1e}")]
    TruncationOverflow { tail: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parity scheme requires phi = pi/2, got {0}")]
    ParityScheme(f64),

    #[error("conditional branch has zero probability")]
    ZeroProbabilityBranch,

    #[error("auxiliary cavity not in vacuum at entry (excited population {0:.3e})")]
    AuxiliaryNotVacuum(f64),

    #[error("degenerate coherence denominator {0:.3e}")]
    DegenerateDenominator(f64),

    #[error("decoherence fit rejected: {0}")]
    FitRejected(String),

    #[error("malformed state file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
