use alloc::string::String;

/// Errors raised by the model, graph and estimation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("Id - B is numerically singular (reciprocal condition number {rcond:e})")]
    SingularStructure { rcond: f64 },

    #[error("sample size {n} must exceed the instrument count {m}")]
    InvalidSampleSize { n: usize, m: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("predictor subgraph contains a cycle")]
    CyclicGraph,

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("residual lies in the instrument span; the Anderson-Rubin denominator vanishes")]
    DegenerateResidual,

    #[error("instrument Gram matrix is singular")]
    RankDeficientInstruments,

    #[error("first-stage projected design is singular")]
    RankDeficientFirstStage,

    #[error("regression design is rank deficient")]
    RankDeficientDesign,

    #[error("generalized eigenproblem is degenerate")]
    EigenFailure,

    #[error("minimizing eigenvector has a vanishing response component")]
    NormalizationFailure,

    #[error("subset enumeration of {count} sets exceeds the budget of {budget}; pass force to override")]
    SizeGuard { count: u128, budget: u128 },

    #[error("every subset at sparsity level {0} failed to fit")]
    AllSubsetsFailed(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
