//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by dense linear algebra and divergence routines.
#[derive(Debug, Error)]
pub enum NumericError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetric beyond tolerance {tol:e} at ({i},{j})")]
    Asymmetric { i: usize, j: usize, tol: f64 },
    #[error("matrix not positive definite (Cholesky failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("zero-norm vector has no direction")]
    DegenerateDirection,
    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },
}

/// Errors raised by dataset construction, ingestion and manipulation.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),
    #[error("labels not binary after mapping: found {count} distinct non-positive tokens")]
    NonBinaryLabels { count: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid proportion {0}, expected value in [0,1]")]
    InvalidProportion(f64),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

/// Errors raised by best-response solvers.
#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("unsupported cost geometry for closed form: {0}")]
    UnsupportedGeometry(String),
    #[error("unknown misspecification variant: {0}")]
    UnknownVariant(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("non-finite score along ascent path at iteration {iteration}")]
    NonFiniteScore { iteration: usize },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Errors raised by the attention engine.
#[derive(Debug, Error)]
pub enum IclError {
    #[error("token width {got} does not match layer width {expected}")]
    TokenWidthMismatch { expected: usize, got: usize },
    #[error("empty context")]
    EmptyContext,
    #[error("layer count must be >= 1")]
    ZeroLayers,
    #[error("invalid step size: {0}")]
    InvalidStep(f64),
    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate { step: usize },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Errors raised by strategic-context construction and SPN prediction.
#[derive(Debug, Error)]
pub enum SpnError {
    #[error("context size {k} exceeds available rows {available}")]
    ContextTooLarge { k: usize, available: usize },
    #[error("flattened context length {got} exceeds capacity {cap}")]
    CapacityExceeded { got: usize, cap: usize },
    #[error("empty context")]
    EmptyContext,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("best response failed at context row {index}: {source}")]
    ResponseFailed {
        index: usize,
        source: ResponseError,
    },
    #[error(transparent)]
    Icl(#[from] IclError),
}

/// Errors raised by the discrete meta-prior verification module.
#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("outcome spaces differ: {left} vs {right} atoms")]
    OutcomeSpaceMismatch { left: usize, right: usize },
    #[error("probability vector invalid: {0}")]
    InvalidDistribution(String),
    #[error("sample size {n} exceeds enumeration limit {limit}")]
    EnumerationTooLarge { n: usize, limit: usize },
    #[error("functional margin {margin:e} below required {gamma:e}")]
    MarginTooSmall { margin: f64, gamma: f64 },
    #[error("task map moves non-strategic support member {index}")]
    SupportNotFixed { index: usize },
}

/// Errors raised by experiment runners.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Spn(#[from] SpnError),
    #[error(transparent)]
    Icl(#[from] IclError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
