use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix in {context} (|det| = {det:e})")]
    Singular { context: &'static str, det: f64 },

    #[error("not in ambient algebra: {0}")]
    NotInAmbientAlgebra(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("non-nested chain: level {level} is not contained in level {next}")]
    NonNestedChain { level: usize, next: usize },

    #[error("invalid driver: {0}")]
    InvalidDriver(String),

    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("group element lost invertibility at t = {t}")]
    LostInvertibility { t: f64 },

    #[error("field {field} has a projected jet not realized by an affine field of the structure at t = {t}: {reason}")]
    FieldNotRealizable { field: usize, t: f64, reason: String },

    #[error("q-factor is not scalar (residual {residual:e})")]
    NonScalarFactor { residual: f64 },

    #[error("{0}")]
    Invalid(String),
}
