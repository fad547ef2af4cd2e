//! G-structures on flat R^n.
//!
//! Each [`StructureSpec`] fixes a subalgebra `p` of gl(n) (the Lie algebra of the
//! structure group), a complementary subalgebra `q`, and the projection onto `p`
//! along `q`. The vertical factor of a decomposition lives in the group generated
//! by `exp(q)`; the automorphism component has linear part in the group of `p`.
//!
//! | kind        | p                         | q                                   |
//! |-------------|---------------------------|-------------------------------------|
//! | isometry    | so(n)                     | upper triangular                    |
//! | volume      | sl(n)                     | multiples of I                      |
//! | affine      | gl(n)                     | 0                                   |
//! | symplectic  | [[A,-S],[S,A]] (u(m))     | [[D,S],[0,-D^T]], D upper triangular |
//! | flag:k1,..  | so(n) + block-diag upper  | strictly block-upper triangular     |

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::{
    determinant, ensure_finite, ensure_square, inverse, max_abs, polar_orthogonal, predicate_residual,
    symplectic_form, Matrix, Predicate,
};
use crate::tol;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureKind {
    Isometry,
    VolumePreserving,
    Affine,
    SymplecticUnitary,
    FlagLevel(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureSpec {
    kind: StructureKind,
    n: usize,
    /// Block index of each coordinate, only for flag levels.
    blocks: Vec<usize>,
}

/// A matrix split as `p_part + q_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub p_part: Matrix,
    pub q_part: Matrix,
}

impl StructureSpec {
    pub fn new(kind: StructureKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FlowError::InvalidStructure("dimension must be positive".into()));
        }
        let mut blocks = Vec::new();
        match &kind {
            StructureKind::SymplecticUnitary if !n.is_multiple_of(2) => {
                return Err(FlowError::InvalidStructure(format!(
                    "symplectic structure needs even dimension, got {n}"
                )));
            }
            StructureKind::FlagLevel(sizes) => {
                if sizes.is_empty() || sizes.contains(&0) || sizes.iter().sum::<usize>() != n {
                    return Err(FlowError::InvalidStructure(format!(
                        "flag block sizes {sizes:?} must be positive and sum to {n}"
                    )));
                }
                for (b, &k) in sizes.iter().enumerate() {
                    blocks.extend(std::iter::repeat_n(b, k));
                }
            }
            _ => {}
        }
        Ok(Self { kind, n, blocks })
    }

    /// Parses a canonical name: `isometry`, `volume`, `affine`, `symplectic`, `flag:k1,k2,...`.
    pub fn parse(name: &str, n: usize) -> Result<Self> {
        let name = name.trim();
        let kind = match name {
            "isometry" => StructureKind::Isometry,
            "volume" => StructureKind::VolumePreserving,
            "affine" => StructureKind::Affine,
            "symplectic" => StructureKind::SymplecticUnitary,
            _ => {
                let sizes = name
                    .strip_prefix("flag:")
                    .ok_or_else(|| FlowError::InvalidStructure(format!("unknown structure '{name}'")))?;
                let sizes = sizes
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| FlowError::InvalidStructure(format!("bad flag block sizes in '{name}'")))?;
                StructureKind::FlagLevel(sizes)
            }
        };
        Self::new(kind, n)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            StructureKind::Isometry => "isometry".into(),
            StructureKind::VolumePreserving => "volume".into(),
            StructureKind::Affine => "affine".into(),
            StructureKind::SymplecticUnitary => "symplectic".into(),
            StructureKind::FlagLevel(k) => {
                let s: Vec<String> = k.iter().map(|v| v.to_string()).collect();
                format!("flag:{}", s.join(","))
            }
        }
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when the projection commutes with conjugation by every invertible
    /// matrix and the complement is central. Then `g p(g^-1 M g) = p(M) g`, which
    /// lets the integrator avoid inverting (possibly ill-conditioned) group elements.
    pub fn conjugation_equivariant(&self) -> bool {
        matches!(self.kind, StructureKind::VolumePreserving | StructureKind::Affine)
    }

    fn check_dim(&self, a: &Matrix) -> Result<()> {
        let n = ensure_square(a)?;
        if n != self.n {
            return Err(FlowError::DimensionMismatch { expected: self.n, got: n });
        }
        Ok(())
    }

    /// Checks that `a` lies in the ambient algebra (gl(n), or sp(2m) for the symplectic kind).
    pub fn check_ambient(&self, a: &Matrix) -> Result<()> {
        self.check_dim(a)?;
        ensure_finite(a, "projection input")?;
        if self.kind == StructureKind::SymplecticUnitary {
            let r = predicate_residual(a, &Predicate::SymplecticAlgebra);
            if r > tol::ALGEBRA {
                return Err(FlowError::NotInAmbientAlgebra(format!(
                    "matrix is not in sp({}) (residual {r:e})",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Complement part of `a`; the subalgebra part is `a - q`.
    fn complement_part(&self, a: &Matrix) -> Matrix {
        let n = self.n;
        match &self.kind {
            StructureKind::Isometry => iwasawa_upper(a),
            StructureKind::VolumePreserving => Matrix::identity(n, n) * (a.trace() / n as f64),
            StructureKind::Affine => Matrix::zeros(n, n),
            StructureKind::SymplecticUnitary => {
                let m = n / 2;
                let p = a.view((0, 0), (m, m)).into_owned();
                let delta = iwasawa_upper(&p);
                let mut q = Matrix::zeros(n, n);
                for i in 0..m {
                    for j in 0..m {
                        q[(i, j)] = delta[(i, j)];
                        q[(m + i, m + j)] = -delta[(j, i)];
                        // off-diagonal blocks: Q + R, both symmetric for a in sp(2m)
                        q[(i, m + j)] = a[(i, m + j)] + a[(m + i, j)];
                    }
                }
                q
            }
            StructureKind::FlagLevel(_) => {
                let upper = iwasawa_upper(a);
                let mut q = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if self.blocks[i] < self.blocks[j] {
                            q[(i, j)] = upper[(i, j)];
                        }
                    }
                }
                q
            }
        }
    }

    /// Projection onto `p` along `q`.
    pub fn project(&self, a: &Matrix) -> Result<SplitResult> {
        self.check_ambient(a)?;
        let q_part = self.complement_part(a);
        let p_part = a - &q_part;
        Ok(SplitResult { p_part, q_part })
    }

    /// Split without the ambient-algebra check; callers validate inputs themselves.
    pub(crate) fn project_unchecked(&self, a: &Matrix) -> SplitResult {
        let q_part = self.complement_part(a);
        let p_part = a - &q_part;
        SplitResult { p_part, q_part }
    }

    /// Residual of membership in the subalgebra `p`.
    pub fn subalgebra_residual(&self, a: &Matrix) -> f64 {
        if self.check_dim(a).is_err() {
            return f64::INFINITY;
        }
        let n = self.n;
        match &self.kind {
            StructureKind::Isometry => predicate_residual(a, &Predicate::Skew),
            StructureKind::VolumePreserving => predicate_residual(a, &Predicate::Traceless),
            StructureKind::Affine => 0.0,
            StructureKind::SymplecticUnitary => {
                let m = n / 2;
                let mut r = predicate_residual(a, &Predicate::Skew);
                for i in 0..m {
                    for j in 0..m {
                        r = r.max((a[(i, j)] - a[(m + i, m + j)]).abs());
                        r = r.max((a[(i, m + j)] + a[(m + i, j)]).abs());
                    }
                }
                r
            }
            StructureKind::FlagLevel(_) => {
                // so(n) + block upper: only pairs straddling two blocks are constrained
                let mut r = 0.0_f64;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if self.blocks[i] != self.blocks[j] {
                            r = r.max((a[(i, j)] + a[(j, i)]).abs());
                        }
                    }
                }
                r
            }
        }
    }

    /// Residual of membership in the complement `q`.
    pub fn complement_residual(&self, a: &Matrix) -> f64 {
        if self.check_dim(a).is_err() {
            return f64::INFINITY;
        }
        let n = self.n;
        match &self.kind {
            StructureKind::Isometry => predicate_residual(a, &Predicate::UpperTriangular),
            StructureKind::VolumePreserving => predicate_residual(a, &Predicate::ScalarMultipleOfIdentity),
            StructureKind::Affine => max_abs(a),
            StructureKind::SymplecticUnitary => {
                let m = n / 2;
                let mut r = 0.0_f64;
                for i in 0..m {
                    for j in 0..m {
                        r = r.max(a[(m + i, j)].abs());
                        r = r.max((a[(m + i, m + j)] + a[(j, i)]).abs());
                        r = r.max((a[(i, m + j)] - a[(j, m + i)]).abs());
                        if i > j {
                            r = r.max(a[(i, j)].abs());
                        }
                    }
                }
                r
            }
            StructureKind::FlagLevel(_) => {
                let mut r = 0.0_f64;
                for i in 0..n {
                    for j in 0..n {
                        if self.blocks[i] >= self.blocks[j] {
                            r = r.max(a[(i, j)].abs());
                        }
                    }
                }
                r
            }
        }
    }

    pub fn in_subalgebra(&self, a: &Matrix) -> bool {
        self.subalgebra_residual(a) <= tol::ALGEBRA
    }

    pub fn in_complement(&self, a: &Matrix) -> bool {
        self.complement_residual(a) <= tol::ALGEBRA
    }

    /// Whether the catalog guarantees `p` is closed under the bracket.
    /// Flag levels are not: so(n) plus block upper-triangular matrices is only a
    /// linear complement to the strictly block-upper part.
    pub fn subalgebra_is_closed(&self) -> bool {
        !matches!(self.kind, StructureKind::FlagLevel(_))
    }

    /// A basis of `p`.
    pub fn subalgebra_basis(&self) -> Vec<Matrix> {
        let n = self.n;
        let e = |i: usize, j: usize| crate::linalg::elementary(n, i, j);
        let mut out = Vec::new();
        match &self.kind {
            StructureKind::Isometry => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        out.push(e(i, j) - e(j, i));
                    }
                }
            }
            StructureKind::VolumePreserving => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            out.push(e(i, j));
                        }
                    }
                }
                for i in 0..n.saturating_sub(1) {
                    out.push(e(i, i) - e(n - 1, n - 1));
                }
            }
            StructureKind::Affine => {
                for i in 0..n {
                    for j in 0..n {
                        out.push(e(i, j));
                    }
                }
            }
            StructureKind::SymplecticUnitary => {
                let m = n / 2;
                for i in 0..m {
                    for j in (i + 1)..m {
                        out.push(e(i, j) - e(j, i) + e(m + i, m + j) - e(m + j, m + i));
                    }
                }
                for i in 0..m {
                    for j in i..m {
                        let mut s = e(m + i, j) - e(i, m + j);
                        if i != j {
                            s += e(m + j, i) - e(j, m + i);
                        }
                        out.push(s);
                    }
                }
            }
            StructureKind::FlagLevel(_) => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        out.push(e(i, j) - e(j, i));
                    }
                }
                for i in 0..n {
                    for j in i..n {
                        if self.blocks[i] == self.blocks[j] {
                            out.push(e(i, j));
                        }
                    }
                }
            }
        }
        out
    }

    /// Residual of membership of a group element `g` (in frame coordinates) in the
    /// connected group generated by `exp(q)`, scaled by `max(1, |g|)`.
    pub fn kernel_residual(&self, g: &Matrix) -> Result<f64> {
        self.check_dim(g)?;
        ensure_finite(g, "kernel_membership input")?;
        let det = determinant(g)?;
        if det.abs() <= tol::FRAME_DET {
            return Err(FlowError::Singular { context: "kernel_membership", det });
        }
        let n = self.n;
        let scale = max_abs(g).max(1.0);
        let r = match &self.kind {
            StructureKind::Isometry => {
                let mut r = predicate_residual(g, &Predicate::UpperTriangular);
                for i in 0..n {
                    if g[(i, i)] <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                }
                r /= scale;
                r
            }
            StructureKind::VolumePreserving => {
                if g.trace() <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                predicate_residual(g, &Predicate::ScalarMultipleOfIdentity) / scale
            }
            StructureKind::Affine => max_abs(&(g - Matrix::identity(n, n))),
            StructureKind::SymplecticUnitary => {
                let m = n / 2;
                let u = g.view((0, 0), (m, m)).into_owned();
                let mut r = predicate_residual(&u, &Predicate::UpperTriangular);
                for i in 0..m {
                    if u[(i, i)] <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                }
                let lower_left = g.view((m, 0), (m, m)).into_owned();
                r = r.max(max_abs(&lower_left));
                let u_inv_t = inverse(&u, "kernel_membership")?.transpose();
                let lower_right = g.view((m, m), (m, m)).into_owned();
                r = r.max(max_abs(&(lower_right - u_inv_t)));
                let j = symplectic_form(m);
                r = r.max(max_abs(&(g.transpose() * &j * g - &j)));
                r / scale
            }
            StructureKind::FlagLevel(_) => {
                let mut r = 0.0_f64;
                for i in 0..n {
                    for j in 0..n {
                        if self.blocks[i] > self.blocks[j] {
                            r = r.max(g[(i, j)].abs());
                        } else if self.blocks[i] == self.blocks[j] {
                            let id = if i == j { 1.0 } else { 0.0 };
                            r = r.max((g[(i, j)] - id).abs());
                        }
                    }
                }
                r / scale
            }
        };
        Ok(r)
    }

    /// Whether `g` lies in `<exp(q)>` within [`tol::KERNEL`].
    pub fn kernel_membership(&self, g: &Matrix) -> Result<bool> {
        Ok(self.kernel_residual(g)? <= tol::KERNEL)
    }

    /// Distance-like residual of a linear part `g` (frame coordinates) from the
    /// structure group: orthogonality, |det - 1|, or symplectic-unitary defects.
    pub fn group_residual(&self, g: &Matrix) -> f64 {
        let n = self.n;
        let id = Matrix::identity(n, n);
        match &self.kind {
            StructureKind::Isometry => max_abs(&(g.transpose() * g - &id)),
            StructureKind::VolumePreserving => (g.clone().lu().determinant() - 1.0).abs(),
            StructureKind::Affine | StructureKind::FlagLevel(_) => {
                if g.clone().lu().determinant() > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            StructureKind::SymplecticUnitary => {
                let j = symplectic_form(n / 2);
                let orth = max_abs(&(g.transpose() * g - &id));
                orth.max(max_abs(&(g.transpose() * &j * g - &j)))
            }
        }
    }

    /// Snaps a linear part (frame coordinates) back onto the structure group.
    pub fn reproject_group(&self, g: &Matrix) -> Result<Matrix> {
        let n = self.n;
        match &self.kind {
            StructureKind::Isometry => polar_orthogonal(g),
            StructureKind::VolumePreserving => {
                let det = determinant(g)?;
                if det <= 0.0 || !det.is_finite() {
                    return Err(FlowError::Singular { context: "volume reprojection", det });
                }
                Ok(g * det.powf(-1.0 / n as f64))
            }
            StructureKind::Affine | StructureKind::FlagLevel(_) => Ok(g.clone()),
            StructureKind::SymplecticUnitary => {
                // nearest complex-linear matrix [[X,-Y],[Y,X]], then its polar factor;
                // Newton's polar iteration stays complex-linear.
                let m = n / 2;
                let mut c = Matrix::zeros(n, n);
                for i in 0..m {
                    for j in 0..m {
                        let x = 0.5 * (g[(i, j)] + g[(m + i, m + j)]);
                        let y = 0.5 * (g[(m + i, j)] - g[(i, m + j)]);
                        c[(i, j)] = x;
                        c[(m + i, m + j)] = x;
                        c[(m + i, j)] = y;
                        c[(i, m + j)] = -y;
                    }
                }
                polar_orthogonal(&c)
            }
        }
    }

    /// Draws a random element of the ambient algebra with entries of order `scale`.
    pub fn random_ambient<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Matrix {
        let n = self.n;
        if self.kind == StructureKind::SymplecticUnitary {
            let m = n / 2;
            let p = Matrix::from_fn(m, m, |_, _| rng.random_range(-scale..scale));
            let b = Matrix::from_fn(m, m, |_, _| rng.random_range(-scale..scale));
            let c = Matrix::from_fn(m, m, |_, _| rng.random_range(-scale..scale));
            let qs = (&b + b.transpose()) * 0.5;
            let rs = (&c + c.transpose()) * 0.5;
            let mut a = Matrix::zeros(n, n);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] = p[(i, j)];
                    a[(m + i, m + j)] = -p[(j, i)];
                    a[(i, m + j)] = qs[(i, j)];
                    a[(m + i, j)] = rs[(i, j)];
                }
            }
            a
        } else {
            Matrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
        }
    }
}

impl fmt::Display for StructureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Upper-triangular part of the Iwasawa-type split gl = so + upper:
/// diagonal kept, a_ij + a_ji above it, zero below.
fn iwasawa_upper(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = a[(i, i)];
        for j in (i + 1)..n {
            q[(i, j)] = a[(i, j)] + a[(j, i)];
        }
    }
    q
}

/// Nested sequence of structures p_1 ⊂ p_2 ⊂ ... ⊂ p_L, with composed projections.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagChain {
    levels: Vec<StructureSpec>,
}

/// Validates nesting of the subalgebras (each basis element of level i has zero
/// complement part at level i+1) and returns the chain.
pub fn flag_chain(levels: Vec<StructureSpec>) -> Result<FlagChain> {
    if levels.is_empty() {
        return Err(FlowError::InvalidStructure("empty chain".into()));
    }
    let n = levels[0].dim();
    for (i, s) in levels.iter().enumerate() {
        if s.dim() != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: s.dim() });
        }
        if let Some(next) = levels.get(i + 1) {
            for b in s.subalgebra_basis() {
                let nested = match next.project(&b) {
                    Ok(split) => max_abs(&split.q_part) <= tol::IDEMPOTENCE,
                    Err(_) => false,
                };
                if !nested {
                    return Err(FlowError::NonNestedChain { level: i, next: i + 1 });
                }
            }
        }
    }
    Ok(FlagChain { levels })
}

impl FlagChain {
    pub fn levels(&self) -> &[StructureSpec] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Composed projection p_L ∘ ... ∘ p_level applied to `a` (top level first).
    pub fn composed_split(&self, level: usize, a: &Matrix) -> Result<SplitResult> {
        let mut p = a.clone();
        for spec in self.levels[level..].iter().rev() {
            p = spec.project(&p)?.p_part;
        }
        let q_part = a - &p;
        Ok(SplitResult { p_part: p, q_part })
    }
}
