//! Dense small-matrix kernels and Lie-algebra predicates.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; dimensions are small (n <= 16) so
//! nothing here tries to be clever about allocation.

use nalgebra::{DMatrix, DVector};

use crate::error::{FlowError, Result};
use crate::tol;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub(crate) fn ensure_square(a: &Matrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(FlowError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

pub(crate) fn ensure_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FlowError::NonFinite(what))
    }
}

pub(crate) fn ensure_same_dim(a: &Matrix, b: &Matrix) -> Result<usize> {
    let n = ensure_square(a)?;
    let m = ensure_square(b)?;
    if n != m {
        return Err(FlowError::DimensionMismatch { expected: n, got: m });
    }
    Ok(n)
}

/// Builds a square matrix from row-major rows, rejecting ragged or non-finite input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(FlowError::NotSquare { rows: n, cols: r.len() });
        }
    }
    let m = Matrix::from_fn(n, n, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn matrix_to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

/// Elementary matrix E_ij (a single one at row i, column j).
pub fn elementary(n: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e
}

/// Max-abs entry (the entrywise infinity norm).
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Standard symplectic form J = [[0, I], [-I, 0]] of size 2m.
pub fn symplectic_form(m: usize) -> Matrix {
    let mut j = Matrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

/// Infinitesimal rotation in the (i, j) plane: e_j -> e_i with negative sign,
/// so that the 2x2 case is [[0, -1], [1, 0]].
pub fn rotation_generator(n: usize, i: usize, j: usize) -> Matrix {
    let mut k = Matrix::zeros(n, n);
    k[(i, j)] = -1.0;
    k[(j, i)] = 1.0;
    k
}

/// Commutator AB - BA.
pub fn bracket(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_same_dim(a, b)?;
    let out = a * b - b * a;
    ensure_finite(&out, "bracket")?;
    Ok(out)
}

/// Matrix exponential (scaling and squaring with a Padé core).
pub fn mat_exp(a: &Matrix) -> Result<Matrix> {
    ensure_square(a)?;
    ensure_finite(a, "mat_exp input")?;
    let out = a.clone().exp();
    ensure_finite(&out, "mat_exp")?;
    Ok(out)
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    ensure_square(a)?;
    Ok(a.clone().lu().determinant())
}

/// Inverse via LU with partial pivoting.
pub fn inverse(a: &Matrix, context: &'static str) -> Result<Matrix> {
    ensure_square(a)?;
    let lu = a.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det == 0.0 {
        return Err(FlowError::Singular { context, det });
    }
    let inv = lu.try_inverse().ok_or(FlowError::Singular { context, det })?;
    ensure_finite(&inv, context)?;
    Ok(inv)
}

/// QR factorization with the positive-diagonal convention: A = Q R, Q orthogonal,
/// R upper triangular with R_ii > 0.
pub fn qr_positive(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = ensure_square(a)?;
    ensure_finite(a, "qr_positive input")?;
    let det = determinant(a)?;
    if det.abs() <= tol::FRAME_DET {
        return Err(FlowError::Singular { context: "qr_positive", det });
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for k in 0..n {
                q[(k, i)] = -q[(k, i)];
                r[(i, k)] = -r[(i, k)];
            }
        }
    }
    // Householder output leaves rounding noise below the diagonal of R.
    for i in 0..n {
        for j in 0..i {
            r[(i, j)] = 0.0;
        }
    }
    Ok((q, r))
}

/// Nearest orthogonal matrix (polar factor) by Newton iteration X <- (X + X^-T)/2.
/// Intended for matrices already close to orthogonal.
pub fn polar_orthogonal(a: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    let id = Matrix::identity(n, n);
    let mut x = a.clone();
    for _ in 0..8 {
        let inv_t = inverse(&x, "polar_orthogonal")?.transpose();
        x = (&x + inv_t) * 0.5;
        if max_abs(&(x.transpose() * &x - &id)) < 4.0 * f64::EPSILON * n as f64 {
            break;
        }
    }
    Ok(x)
}

/// A frame u0 : R^n -> T_{x0} R^n, stored column-wise. Always invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    matrix: Matrix,
    inverse: Matrix,
}

impl Frame {
    pub fn new(matrix: Matrix) -> Result<Self> {
        ensure_square(&matrix)?;
        ensure_finite(&matrix, "frame")?;
        let det = determinant(&matrix)?;
        if det.abs() <= tol::FRAME_DET {
            return Err(FlowError::Singular { context: "frame", det });
        }
        let inverse = inverse(&matrix, "frame")?;
        Ok(Self { matrix, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: Matrix::identity(n, n), inverse: Matrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn is_orthonormal(&self) -> bool {
        let n = self.dim();
        max_abs(&(self.matrix.transpose() * &self.matrix - Matrix::identity(n, n))) <= tol::ALGEBRA
    }

    /// Expresses a matrix acting on T_{x0} in frame coordinates: u0^-1 M u0.
    pub fn to_frame(&self, m: &Matrix) -> Matrix {
        &self.inverse * m * &self.matrix
    }

    /// Inverse of [`Frame::to_frame`]: u0 M u0^-1.
    pub fn from_frame(&self, m: &Matrix) -> Matrix {
        &self.matrix * m * &self.inverse
    }
}

/// Linear predicates defining the subalgebras and groups used by the structure catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Skew,
    Symmetric,
    Traceless,
    UpperTriangular,
    /// M^T J + J M = 0 for the standard symplectic form.
    SymplecticAlgebra,
    ScalarMultipleOfIdentity,
}

/// Size of the violation of a predicate (max-abs of the defining identity).
pub fn predicate_residual(a: &Matrix, predicate: &Predicate) -> f64 {
    let n = a.nrows();
    if a.ncols() != n {
        return f64::INFINITY;
    }
    match predicate {
        Predicate::Skew => max_abs(&(a + a.transpose())),
        Predicate::Symmetric => max_abs(&(a - a.transpose())),
        Predicate::Traceless => a.trace().abs(),
        Predicate::UpperTriangular => {
            let mut r = 0.0_f64;
            for i in 0..n {
                for j in 0..i {
                    r = r.max(a[(i, j)].abs());
                }
            }
            r
        }
        Predicate::SymplecticAlgebra => {
            if !n.is_multiple_of(2) {
                return f64::INFINITY;
            }
            let j = symplectic_form(n / 2);
            max_abs(&(a.transpose() * &j + &j * a))
        }
        Predicate::ScalarMultipleOfIdentity => {
            if n == 0 {
                return 0.0;
            }
            let c = a.trace() / n as f64;
            max_abs(&(a - Matrix::identity(n, n) * c))
        }
    }
}

pub fn membership(a: &Matrix, predicate: &Predicate) -> bool {
    a.iter().all(|v| v.is_finite()) && predicate_residual(a, predicate) <= tol::ALGEBRA
}
