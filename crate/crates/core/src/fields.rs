//! Vector fields with exact 1-jets.
//!
//! Fields are affine or polynomial of degree at most 3, stored as dense
//! coefficient tensors. Both classes are closed under pullback by affine maps,
//! so `Ad(ξ^-1) X` stays representable and every Jacobian is exact.

use crate::affine::AffineTransform;
use crate::error::{FlowError, Result};
use crate::linalg::{ensure_finite, ensure_square, inverse, Matrix, Vector};

/// Polynomial field
/// `X_i(x) = c_i + L_ij x_j + Q_ijk x_j x_k + C_ijkl x_j x_k x_l` (summation implied).
///
/// `quadratic` is stored flat with index `(i*n + j)*n + k`, `cubic` with
/// `((i*n + j)*n + k)*n + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub constant: Vector,
    pub linear: Matrix,
    pub quadratic: Option<Vec<f64>>,
    pub cubic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Affine { a: Matrix, b: Vector },
    Polynomial(Polynomial),
}

/// Value and Jacobian of a field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Vector,
    pub jacobian: Matrix,
}

impl Polynomial {
    pub fn new(constant: Vector, linear: Matrix, quadratic: Option<Vec<f64>>, cubic: Option<Vec<f64>>) -> Result<Self> {
        let n = ensure_square(&linear)?;
        if constant.len() != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: constant.len() });
        }
        if let Some(q) = &quadratic {
            if q.len() != n * n * n {
                return Err(FlowError::DimensionMismatch { expected: n * n * n, got: q.len() });
            }
        }
        if let Some(c) = &cubic {
            if c.len() != n * n * n * n {
                return Err(FlowError::DimensionMismatch { expected: n * n * n * n, got: c.len() });
            }
        }
        let finite = constant.iter().chain(linear.iter()).all(|v| v.is_finite())
            && quadratic.iter().flatten().all(|v| v.is_finite())
            && cubic.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(FlowError::NonFinite("polynomial coefficients"));
        }
        Ok(Self { constant, linear, quadratic, cubic })
    }

    fn dim(&self) -> usize {
        self.constant.len()
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        let n = self.dim();
        let mut out = &self.constant + &self.linear * x;
        if let Some(q) = &self.quadratic {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += q[(i * n + j) * n + k] * x[j] * x[k];
                    }
                }
                out[i] += s;
            }
        }
        if let Some(c) = &self.cubic {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            s += c[((i * n + j) * n + k) * n + l] * x[j] * x[k] * x[l];
                        }
                    }
                }
                out[i] += s;
            }
        }
        out
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let n = self.dim();
        let mut jac = self.linear.clone();
        if let Some(q) = &self.quadratic {
            for i in 0..n {
                for m in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += (q[(i * n + m) * n + k] + q[(i * n + k) * n + m]) * x[k];
                    }
                    jac[(i, m)] += s;
                }
            }
        }
        if let Some(c) = &self.cubic {
            let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
            for i in 0..n {
                for m in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            s += (c[idx(i, m, k, l)] + c[idx(i, k, m, l)] + c[idx(i, k, l, m)]) * x[k] * x[l];
                        }
                    }
                    jac[(i, m)] += s;
                }
            }
        }
        jac
    }

    /// x -> P(G x), contracting every input slot with G.
    fn precompose_linear(&self, g: &Matrix) -> Polynomial {
        let n = self.dim();
        let quadratic = self.quadratic.as_ref().map(|q| {
            let mut out = vec![0.0; n * n * n];
            for i in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut s = 0.0;
                        for j in 0..n {
                            for k in 0..n {
                                s += q[(i * n + j) * n + k] * g[(j, a)] * g[(k, b)];
                            }
                        }
                        out[(i * n + a) * n + b] = s;
                    }
                }
            }
            out
        });
        let cubic = self.cubic.as_ref().map(|c| {
            let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
            // one slot at a time keeps this O(n^5)
            let mut t = c.clone();
            for slot in 0..3 {
                let mut next = vec![0.0; t.len()];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                let mut s = 0.0;
                                for r in 0..n {
                                    s += match slot {
                                        0 => t[idx(i, r, k, l)] * g[(r, j)],
                                        1 => t[idx(i, j, r, l)] * g[(r, k)],
                                        _ => t[idx(i, j, k, r)] * g[(r, l)],
                                    };
                                }
                                next[idx(i, j, k, l)] = s;
                            }
                        }
                    }
                }
                t = next;
            }
            t
        });
        Polynomial { constant: self.constant.clone(), linear: &self.linear * g, quadratic, cubic }
    }

    /// x -> P(x + s).
    fn shift(&self, s: &Vector) -> Polynomial {
        let n = self.dim();
        let constant = self.evaluate(s);
        let linear = self.jacobian(s);
        let quadratic = match (&self.quadratic, &self.cubic) {
            (None, None) => None,
            (q, c) => {
                let mut out = q.clone().unwrap_or_else(|| vec![0.0; n * n * n]);
                if let Some(c) = c {
                    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
                    for i in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                let mut acc = 0.0;
                                for l in 0..n {
                                    acc += (c[idx(i, a, b, l)] + c[idx(i, a, l, b)] + c[idx(i, l, a, b)]) * s[l];
                                }
                                out[(i * n + a) * n + b] += acc;
                            }
                        }
                    }
                }
                Some(out)
            }
        };
        Polynomial { constant, linear, quadratic, cubic: self.cubic.clone() }
    }

    /// Left-multiplies every coefficient tensor by `m` on the output index.
    fn left_multiply(&self, m: &Matrix) -> Polynomial {
        let n = self.dim();
        let apply = |t: &Vec<f64>, stride: usize| {
            let mut out = vec![0.0; t.len()];
            for i in 0..n {
                for rest in 0..stride {
                    let mut s = 0.0;
                    for r in 0..n {
                        s += m[(i, r)] * t[r * stride + rest];
                    }
                    out[i * stride + rest] = s;
                }
            }
            out
        };
        Polynomial {
            constant: m * &self.constant,
            linear: m * &self.linear,
            quadratic: self.quadratic.as_ref().map(|q| apply(q, n * n)),
            cubic: self.cubic.as_ref().map(|c| apply(c, n * n * n)),
        }
    }
}

impl VectorField {
    pub fn affine(a: Matrix, b: Vector) -> Result<Self> {
        let n = ensure_square(&a)?;
        if b.len() != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: b.len() });
        }
        ensure_finite(&a, "affine field")?;
        if !b.iter().all(|v| v.is_finite()) {
            return Err(FlowError::NonFinite("affine field"));
        }
        Ok(VectorField::Affine { a, b })
    }

    pub fn linear(a: Matrix) -> Result<Self> {
        let n = a.nrows();
        Self::affine(a, Vector::zeros(n))
    }

    pub fn zero(n: usize) -> Self {
        VectorField::Affine { a: Matrix::zeros(n, n), b: Vector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Affine { b, .. } => b.len(),
            VectorField::Polynomial(p) => p.dim(),
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            VectorField::Affine { .. } => true,
            VectorField::Polynomial(p) => p.quadratic.is_none() && p.cubic.is_none(),
        }
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(FlowError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        self.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Vector) -> Vector {
        match self {
            VectorField::Affine { a, b } => a * x + b,
            VectorField::Polynomial(p) => p.evaluate(x),
        }
    }

    pub(crate) fn jacobian_unchecked(&self, x: &Vector) -> Matrix {
        match self {
            VectorField::Affine { a, .. } => a.clone(),
            VectorField::Polynomial(p) => p.jacobian(x),
        }
    }

    /// Exact value and Jacobian at `x0`.
    pub fn jet_at(&self, x0: &Vector) -> Result<Jet> {
        self.check(x0)?;
        Ok(Jet { value: self.eval_unchecked(x0), jacobian: self.jacobian_unchecked(x0) })
    }

    /// Pullback by an affine map: `x -> G^-1 X(G x + h)`.
    pub fn adjoint_field(&self, xi: &AffineTransform) -> Result<VectorField> {
        if xi.dim() != self.dim() {
            return Err(FlowError::DimensionMismatch { expected: self.dim(), got: xi.dim() });
        }
        let g_inv = inverse(&xi.linear, "adjoint_field")?;
        match self {
            VectorField::Affine { a, b } => {
                let a_new = &g_inv * a * &xi.linear;
                let b_new = &g_inv * (a * &xi.translation + b);
                Ok(VectorField::Affine { a: a_new, b: b_new })
            }
            VectorField::Polynomial(p) => {
                // G x + h = G (x + s) with s = G^-1 h
                let s = &g_inv * &xi.translation;
                let pulled = p.precompose_linear(&xi.linear).shift(&s).left_multiply(&g_inv);
                Ok(VectorField::Polynomial(pulled))
            }
        }
    }
}
