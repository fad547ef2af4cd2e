//! Shared numerical tolerances.
//!
//! Integration tolerances that depend on a scenario live in
//! [`crate::scenario::Tolerances`]; the constants here are the fixed ones
//! used by the algebraic kernels.

/// Entrywise tolerance for linear identities that hold exactly in real arithmetic
/// (membership predicates, bracket closure).
pub const ALGEBRA: f64 = 1e-10;

/// Idempotence of projections.
pub const IDEMPOTENCE: f64 = 1e-12;

/// Minimum |det| for a frame to count as invertible.
pub const FRAME_DET: f64 = 1e-12;

/// Minimum |det| for the linear part of a group element.
pub const GROUP_DET: f64 = 1e-10;

/// Kernel-group membership of a vertical factor.
pub const KERNEL: f64 = 1e-8;

/// Default for integration comparisons.
pub const INTEGRATION: f64 = 1e-6;
