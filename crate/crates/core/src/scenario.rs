//! TOML scenario files.
//!
//! ```toml
//! name = "example"
//! dimension = 2
//! t_end = 1.0
//! dt = 1e-3
//! scheme = "rk4"            # or "heun"
//! structure = "isometry"    # or: chain = ["isometry", "volume", "affine"]
//! x0 = [0.0, 0.0]
//! probes = [[1.0, 0.0], [0.0, 1.0]]
//! paths = 4
//! seed = 7
//! checks = ["qr"]
//!
//! [driver]
//! kind = "brownian"         # or kind = "control" with breakpoints/values
//!
//! [[fields]]                # fields[0] is the drift, fields[j] pairs with noise channel j
//! kind = "affine"
//! a = [[0.0, 1.0], [-1.0, 0.0]]
//! b = [0.0, 0.0]
//! ```

use serde::{Deserialize, Serialize};

use crate::driver::DriverMode;
use crate::error::{FlowError, Result};
use crate::fields::{Polynomial, VectorField};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::linalg::{Frame, Matrix, Vector};
use crate::structures::{flag_chain, FlagChain, StructureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriverSpec {
    Brownian,
    Control { breakpoints: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Affine {
        a: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
    },
    Polynomial {
        constant: Vec<f64>,
        linear: Vec<Vec<f64>>,
        /// Flat `n^3` coefficients, index `(i*n + j)*n + k`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quadratic: Option<Vec<f64>>,
        /// Flat `n^4` coefficients, index `((i*n + j)*n + k)*n + l`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cubic: Option<Vec<f64>>,
    },
}

/// Oracle comparisons a scenario opts into, beyond the always-on diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCheck {
    /// Closed-form factors registered under the scenario's `truth` name.
    Truth,
    /// Group factor against the orthogonal factor of `qr_positive(Φ)`.
    Qr,
    /// Automorphism fields: trivial vertical factor and `ξ = φ` on probes.
    Killing,
    /// Lyapunov sum against the determinant oracle (and the registered truth, if any).
    Lyapunov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub kernel: f64,
    /// Group residual per unit time without reprojection.
    pub group_drift_rate: f64,
    /// Absolute group residual with reprojection.
    pub group_reprojected: f64,
    pub reconstruction: f64,
    pub q_consistency: f64,
    pub telescoping: f64,
    pub truth: f64,
    pub qr: f64,
    pub killing_q: f64,
    pub killing_xi: f64,
    pub lyapunov: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fixed_point: 1e-6,
            kernel: 1e-5,
            group_drift_rate: 1e-6,
            group_reprojected: 1e-10,
            reconstruction: 1e-5,
            q_consistency: 1e-4,
            telescoping: 1e-4,
            truth: 1e-6,
            qr: 1e-4,
            killing_q: 1e-6,
            killing_xi: 1e-5,
            lyapunov: 1e-6,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Rk4
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dimension: usize,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub reproject: bool,
    #[serde(default = "default_one")]
    pub sample_every: usize,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    #[serde(default = "default_one")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default)]
    pub checks: Vec<OracleCheck>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub driver: DriverSpec,
    pub fields: Vec<FieldSpec>,
}

/// What a scenario decomposes along.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Single(StructureSpec),
    Cascade(FlagChain),
}

/// A scenario with every cross-reference resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub fields: Vec<VectorField>,
    pub x0: Vector,
    pub frame: Frame,
    pub probes: Vec<Vector>,
    pub target: Target,
    pub config: IntegratorConfig,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> FlowError {
    FlowError::Invalid(format!("{field}: {msg}"))
}

fn square(field: &str, rows: &[Vec<f64>], n: usize) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(field, format!("expected a {n}x{n} matrix (row-major)")));
    }
    let m = Matrix::from_row_iterator(n, n, rows.iter().flatten().copied());
    if !m.iter().all(|v| v.is_finite()) {
        return Err(invalid(field, "non-finite entry"));
    }
    Ok(m)
}

fn vector(field: &str, v: &[f64], n: usize) -> Result<Vector> {
    if v.len() != n {
        return Err(invalid(field, format!("expected {n} entries, got {}", v.len())));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(invalid(field, "non-finite entry"));
    }
    Ok(Vector::from_column_slice(v))
}

impl FieldSpec {
    pub fn build(&self, n: usize, field: &str) -> Result<VectorField> {
        match self {
            FieldSpec::Affine { a, b } => {
                let a = square(&format!("{field}.a"), a, n)?;
                let b = match b {
                    Some(b) => vector(&format!("{field}.b"), b, n)?,
                    None => Vector::zeros(n),
                };
                VectorField::affine(a, b)
            }
            FieldSpec::Polynomial { constant, linear, quadratic, cubic } => {
                let c = vector(&format!("{field}.constant"), constant, n)?;
                let l = square(&format!("{field}.linear"), linear, n)?;
                if let Some(q) = quadratic {
                    if q.len() != n * n * n {
                        return Err(invalid(&format!("{field}.quadratic"), format!("expected {} entries", n * n * n)));
                    }
                }
                if let Some(q) = cubic {
                    if q.len() != n * n * n * n {
                        return Err(invalid(&format!("{field}.cubic"), format!("expected {} entries", n * n * n * n)));
                    }
                }
                Polynomial::new(c, l, quadratic.clone(), cubic.clone())
                    .map(VectorField::Polynomial)
                    .map_err(|e| invalid(field, e))
            }
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| FlowError::Invalid(format!("scenario parse error: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FlowError::Invalid(format!("scenario serialization: {e}")))
    }

    pub fn noise_channels(&self) -> usize {
        self.fields.len().saturating_sub(1)
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig { scheme: self.scheme, reproject: self.reproject, sample_every: self.sample_every }
    }

    /// Driver for path `index`: Brownian paths share the seed and use the index as stream.
    pub fn driver_mode(&self, index: usize) -> DriverMode {
        match &self.driver {
            DriverSpec::Brownian => DriverMode::Brownian { seed: self.seed, stream: index as u64 },
            DriverSpec::Control { breakpoints, values } => {
                DriverMode::Control { breakpoints: breakpoints.clone(), values: values.clone() }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    /// Resolves all cross-references; errors name the offending field.
    pub fn prepare(&self) -> Result<Prepared> {
        let n = self.dimension;
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(invalid("name", "must be usable as a directory name"));
        }
        if n == 0 {
            return Err(invalid("dimension", "must be positive"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_end", "must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", "must be at least 1"));
        }
        if self.paths == 0 {
            return Err(invalid("paths", "must be at least 1"));
        }
        if self.fields.is_empty() {
            return Err(invalid("fields", "at least the drift field is required"));
        }
        match &self.driver {
            DriverSpec::Brownian => {}
            DriverSpec::Control { breakpoints, values } => {
                if self.paths > 1 {
                    return Err(invalid("paths", "several paths need a brownian driver"));
                }
                if breakpoints.len() != values.len() {
                    return Err(invalid("driver.values", "one row per breakpoint is required"));
                }
                if let Some(i) = values.iter().position(|r| r.len() != self.noise_channels()) {
                    return Err(invalid(
                        &format!("driver.values[{i}]"),
                        format!("expected {} entries (one per non-drift field)", self.noise_channels()),
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(invalid("driver.breakpoints", "must be strictly increasing"));
                }
            }
        }
        let fields = self
            .fields
            .iter()
            .enumerate()
            .map(|(j, f)| f.build(n, &format!("fields[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let x0 = vector("x0", &self.x0, n)?;
        let frame = match &self.u0 {
            Some(rows) => Frame::new(square("u0", rows, n)?).map_err(|e| invalid("u0", e))?,
            None => Frame::identity(n),
        };
        let probes = self
            .probes
            .iter()
            .enumerate()
            .map(|(i, p)| vector(&format!("probes[{i}]"), p, n))
            .collect::<Result<Vec<_>>>()?;
        let target = match (&self.structure, &self.chain) {
            (Some(s), None) => Target::Single(StructureSpec::parse(s, n).map_err(|e| invalid("structure", e))?),
            (None, Some(levels)) => {
                let specs = levels
                    .iter()
                    .enumerate()
                    .map(|(i, s)| StructureSpec::parse(s, n).map_err(|e| invalid(&format!("chain[{i}]"), e)))
                    .collect::<Result<Vec<_>>>()?;
                Target::Cascade(flag_chain(specs).map_err(|e| invalid("chain", e))?)
            }
            _ => return Err(invalid("structure", "exactly one of `structure` or `chain` is required")),
        };
        for check in &self.checks {
            match (check, &target) {
                (OracleCheck::Truth, _) if self.truth.is_none() => {
                    return Err(invalid("checks", "the truth check needs a `truth` name"));
                }
                (OracleCheck::Truth, _) => {
                    let name = self.truth.as_deref().unwrap_or_default();
                    if crate::truth::lookup(name).is_none() {
                        return Err(invalid("truth", format!("no ground truth registered under '{name}'")));
                    }
                }
                (OracleCheck::Qr, Target::Single(s)) => {
                    if s.name() != "isometry" {
                        return Err(invalid("checks", "the qr oracle needs the isometry structure"));
                    }
                    if self.u0.is_some() && frame.matrix() != &Matrix::identity(n, n) {
                        return Err(invalid("checks", "the qr oracle needs the identity frame"));
                    }
                }
                (OracleCheck::Lyapunov, Target::Single(s)) if s.name() != "volume" => {
                    return Err(invalid("checks", "the lyapunov check needs the volume structure"));
                }
                (OracleCheck::Qr | OracleCheck::Lyapunov | OracleCheck::Killing, Target::Cascade(_)) => {
                    return Err(invalid("checks", "oracle checks apply to single-structure scenarios"));
                }
                _ => {}
            }
        }
        Ok(Prepared { fields, x0, frame, probes, target, config: self.integrator_config() })
    }
}
