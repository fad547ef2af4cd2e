// Negated comparisons (`!(x > 0.0)`) are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod builtins;
pub mod decomposition;
pub mod driver;
pub mod error;
pub mod fields;
pub mod integrator;
pub mod linalg;
pub mod report;
pub mod scenario;
pub mod structures;
pub mod tol;
pub mod truth;

pub use error::{FlowError, Result};
