use crate::error::{FlowError, Result};
use crate::linalg::{ensure_square, inverse, Matrix, Vector};

/// The affine map x -> G x + h.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    pub linear: Matrix,
    pub translation: Vector,
}

impl AffineTransform {
    pub fn new(linear: Matrix, translation: Vector) -> Result<Self> {
        let n = ensure_square(&linear)?;
        if translation.len() != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: translation.len() });
        }
        Ok(Self { linear, translation })
    }

    pub fn identity(n: usize) -> Self {
        Self { linear: Matrix::identity(n, n), translation: Vector::zeros(n) }
    }

    pub fn linear_map(linear: Matrix) -> Self {
        let n = linear.nrows();
        Self { linear, translation: Vector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.translation
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineTransform) -> AffineTransform {
        AffineTransform {
            linear: &self.linear * &other.linear,
            translation: &self.linear * &other.translation + &self.translation,
        }
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        let g_inv = inverse(&self.linear, "affine inverse")?;
        let translation = -(&g_inv * &self.translation);
        Ok(AffineTransform { linear: g_inv, translation })
    }

    /// Solves G y = x - h without forming G^-1.
    pub fn apply_inverse(&self, x: &Vector) -> Result<Vector> {
        let rhs = x - &self.translation;
        self.linear
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(FlowError::Singular { context: "affine inverse", det: 0.0 })
    }
}
