//! Fixed-step Stratonovich integration of the flow together with its
//! linearization and any number of group factors.
//!
//! Every step freezes the driver increments and integrates the resulting ODE
//! over unit pseudo-time with an explicit Runge-Kutta scheme (Heun or classical
//! RK4). All components share the stages, so the base point, probe points, the
//! step propagator of the linearization and the group factors stay mutually
//! consistent: the orbit point `ξ(x0)` obeys the same ODE as `x` and therefore
//! tracks it to rounding error for any explicit scheme.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affine::AffineTransform;
use crate::driver::DriverPath;
use crate::error::{FlowError, Result};
use crate::fields::VectorField;
use crate::linalg::{ensure_finite, inverse, Frame, Matrix, Vector};
use crate::structures::{FlagChain, SplitResult, StructureKind, StructureSpec};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Heun,
    Rk4,
}

impl FromStr for Scheme {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heun" => Ok(Scheme::Heun),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(FlowError::Invalid(format!("unknown scheme '{other}' (expected heun or rk4)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Heun => "heun",
            Scheme::Rk4 => "rk4",
        })
    }
}

/// A projection `p_L ∘ ... ∘ p_i` onto the subalgebra of one level of a chain.
/// `stack[0]` is the level's own structure; a single structure is a one-level stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    stack: Vec<StructureSpec>,
}

impl Projection {
    pub fn single(spec: StructureSpec) -> Self {
        Self { stack: vec![spec] }
    }

    pub fn chain_level(chain: &FlagChain, level: usize) -> Self {
        Self { stack: chain.levels()[level..].to_vec() }
    }

    /// The structure whose group this level's factor lives in.
    pub fn structure(&self) -> &StructureSpec {
        &self.stack[0]
    }

    pub fn equivariant(&self) -> bool {
        self.stack.iter().all(StructureSpec::conjugation_equivariant)
    }

    pub fn split(&self, a: &Matrix) -> Result<SplitResult> {
        let mut p = a.clone();
        for spec in self.stack.iter().rev() {
            p = spec.project(&p)?.p_part;
        }
        let q_part = a - &p;
        Ok(SplitResult { p_part: p, q_part })
    }

    fn split_unchecked(&self, a: &Matrix) -> SplitResult {
        let mut p = a.clone();
        for spec in self.stack.iter().rev() {
            p = spec.project_unchecked(&p).p_part;
        }
        let q_part = a - &p;
        SplitResult { p_part: p, q_part }
    }

    fn needs_ambient_check(&self) -> bool {
        self.stack.iter().any(|s| s.kind() == &StructureKind::SymplecticUnitary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    /// Left-invariant group equation with time-dependent projected pullbacks.
    Left,
    /// Right-invariant equation with the projected fields frozen at the initial jets.
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub projection: Projection,
    pub kind: TrackKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Snap each group factor back onto its structure group after every step.
    pub reproject: bool,
    /// Store every `sample_every`-th step (the initial and final states always).
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Rk4, reproject: true, sample_every: 1 }
    }
}

/// The driven system: `fields[j]` is paired with driver channel `j` (channel 0 is time).
#[derive(Debug, Clone)]
pub struct JointSystem {
    pub fields: Vec<VectorField>,
    pub x0: Vector,
    pub frame: Frame,
    pub probes: Vec<Vector>,
    pub tracks: Vec<Track>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub xi: AffineTransform,
    /// Vertical factor evolved by its own group equation (left tracks; identity otherwise).
    pub q_evolved: Matrix,
    /// `log|det G|` accumulated from step propagators.
    pub log_det_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub x: Vector,
    /// Derivative of the flow at x0 applied to the frame.
    pub phi: Matrix,
    /// `log|det Dφ_t(x0)|` accumulated from step propagators.
    pub log_det_flow: f64,
    pub probes: Vec<Vector>,
    pub tracks: Vec<TrackSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Per track, the largest structure-group residual seen after any step.
    pub max_group_residual: Vec<f64>,
    pub steps: usize,
    pub reprojections: usize,
}

/// State of the base point and linearization only.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vector,
    pub phi: Matrix,
}

struct Layout {
    n: usize,
    probes: usize,
    psi: usize,
    tracks: Vec<TrackLayout>,
    len: usize,
}

#[derive(Clone, Copy)]
struct TrackLayout {
    /// G itself for additive left tracks, the step propagator of G otherwise.
    g: usize,
    h: usize,
    /// Step propagator of the evolved vertical factor.
    xi: usize,
    propagated: bool,
}

/// Per-track quantities that stay fixed during a step.
struct TrackStep {
    g_start: Matrix,
    g_start_x0: Vector,
    /// Aggregated frozen homogeneous coefficients `Σ Â_j ΔW^j`, `Σ b̂_j ΔW^j`.
    frozen: Option<(Matrix, Vector)>,
}

struct TrackState {
    g: Matrix,
    h: Vector,
    q: Matrix,
    log_det_g: f64,
    /// Per-field frozen affine coefficients for homogeneous tracks.
    homogeneous: Option<Vec<(Matrix, Vector)>>,
}

fn mat(y: &[f64], off: usize, n: usize) -> Matrix {
    Matrix::from_column_slice(n, n, &y[off..off + n * n])
}

fn vecn(y: &[f64], off: usize, n: usize) -> Vector {
    Vector::from_column_slice(&y[off..off + n])
}

fn put(out: &mut [f64], off: usize, src: &[f64]) {
    out[off..off + src.len()].copy_from_slice(src);
}

fn log_abs_det(a: &Matrix) -> f64 {
    a.clone().lu().determinant().abs().ln()
}

impl JointSystem {
    pub fn new(fields: Vec<VectorField>, x0: Vector, frame: Frame) -> Result<Self> {
        let n = x0.len();
        if fields.is_empty() {
            return Err(FlowError::Invalid("at least one field (the drift) is required".into()));
        }
        for f in &fields {
            if f.dim() != n {
                return Err(FlowError::DimensionMismatch { expected: n, got: f.dim() });
            }
        }
        if frame.dim() != n {
            return Err(FlowError::DimensionMismatch { expected: n, got: frame.dim() });
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(FlowError::NonFinite("x0"));
        }
        Ok(Self { fields, x0, frame, probes: Vec::new(), tracks: Vec::new() })
    }

    pub fn with_probes(mut self, probes: Vec<Vector>) -> Result<Self> {
        for p in &probes {
            if p.len() != self.dim() {
                return Err(FlowError::DimensionMismatch { expected: self.dim(), got: p.len() });
            }
        }
        self.probes = probes;
        Ok(self)
    }

    pub fn with_track(mut self, track: Track) -> Result<Self> {
        let n = track.projection.structure().dim();
        if n != self.dim() {
            return Err(FlowError::DimensionMismatch { expected: self.dim(), got: n });
        }
        self.tracks.push(track);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn layout(&self) -> Layout {
        let n = self.dim();
        let probes = n;
        let psi = probes + n * self.probes.len();
        let mut off = psi + n * n;
        let mut tracks = Vec::new();
        for t in &self.tracks {
            let propagated = t.kind == TrackKind::Homogeneous || t.projection.equivariant();
            let g = off;
            let h = g + n * n;
            let xi = h + n;
            off = xi + n * n;
            tracks.push(TrackLayout { g, h, xi, propagated });
        }
        Layout { n, probes, psi, tracks, len: off }
    }

    /// `(Σ X_j(x) ΔW^j, Σ DX_j(x) ΔW^j)`.
    fn aggregate(&self, x: &Vector, dw: &[f64]) -> (Vector, Matrix) {
        let n = self.dim();
        let mut v = Vector::zeros(n);
        let mut m = Matrix::zeros(n, n);
        for (f, &w) in self.fields.iter().zip(dw) {
            if w != 0.0 {
                v.axpy(w, &f.eval_unchecked(x), 1.0);
                m += f.jacobian_unchecked(x) * w;
            }
        }
        (v, m)
    }

    fn aggregate_value(&self, x: &Vector, dw: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.dim());
        for (f, &w) in self.fields.iter().zip(dw) {
            if w != 0.0 {
                v.axpy(w, &f.eval_unchecked(x), 1.0);
            }
        }
        v
    }

    /// Fails when a field's Jacobian at `y` leaves the ambient algebra of a projection.
    fn check_ambient(&self, projection: &Projection, y: &Vector, t: f64) -> Result<()> {
        if !projection.needs_ambient_check() {
            return Ok(());
        }
        for (j, f) in self.fields.iter().enumerate() {
            let jac = self.frame.to_frame(&f.jacobian_unchecked(y));
            let scale = 1.0f64.max(crate::linalg::max_abs(&jac));
            let mut scaled = jac.clone();
            scaled /= scale;
            for spec in &projection.stack {
                if let Err(e) = spec.check_ambient(&scaled) {
                    return Err(if f.is_affine() {
                        e
                    } else {
                        FlowError::FieldNotRealizable { field: j, t, reason: e.to_string() }
                    });
                }
            }
        }
        Ok(())
    }

    /// Frozen affine coefficients `(Â_j, b̂_j)` of the projected fields at x0.
    fn homogeneous_fields(&self, projection: &Projection) -> Result<Vec<(Matrix, Vector)>> {
        self.check_ambient(projection, &self.x0, 0.0)?;
        self.fields
            .iter()
            .map(|f| {
                let jac = self.frame.to_frame(&f.jacobian_unchecked(&self.x0));
                let a = self.frame.from_frame(&projection.split_unchecked(&jac).p_part);
                let b = f.eval_unchecked(&self.x0) - &a * &self.x0;
                Ok((a, b))
            })
            .collect()
    }

    fn rhs(&self, lay: &Layout, steps: &[TrackStep], y: &[f64], dw: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = lay.n;
        let mut out = vec![0.0; lay.len];
        let x = vecn(y, 0, n);
        let (vx, mx) = self.aggregate(&x, dw);
        put(&mut out, 0, vx.as_slice());
        for k in 0..self.probes.len() {
            let off = lay.probes + k * n;
            let p = vecn(y, off, n);
            put(&mut out, off, self.aggregate_value(&p, dw).as_slice());
        }
        let psi = mat(y, lay.psi, n);
        put(&mut out, lay.psi, (&mx * &psi).as_slice());

        let u0 = self.frame.matrix();
        let u0_inv = self.frame.inverse();
        for ((track, tl), ts) in self.tracks.iter().zip(&lay.tracks).zip(steps) {
            let h = vecn(y, tl.h, n);
            let xi_prop = mat(y, tl.xi, n);
            match track.kind {
                TrackKind::Homogeneous => {
                    let (a, b) = ts.frozen.as_ref().expect("homogeneous coefficients");
                    let gamma = mat(y, tl.g, n);
                    put(&mut out, tl.g, (a * &gamma).as_slice());
                    put(&mut out, tl.h, (a * &h + b).as_slice());
                }
                TrackKind::Left if tl.propagated => {
                    let gamma = mat(y, tl.g, n);
                    let g_x0 = &gamma * &ts.g_start_x0;
                    let orbit = &g_x0 + &h;
                    self.check_ambient(&track.projection, &orbit, t)?;
                    let (v, m) = self.aggregate(&orbit, dw);
                    // p commutes with conjugation and q is central, so the
                    // left-invariant form G·Â equals p(M)·G.
                    let split = track.projection.split_unchecked(&m);
                    put(&mut out, tl.g, (&split.p_part * &gamma).as_slice());
                    put(&mut out, tl.h, (v - &split.p_part * g_x0).as_slice());
                    put(&mut out, tl.xi, (&split.q_part * &xi_prop).as_slice());
                }
                TrackKind::Left => {
                    let g = mat(y, tl.g, n);
                    let orbit = &g * &self.x0 + &h;
                    self.check_ambient(&track.projection, &orbit, t)?;
                    let (v, m) = self.aggregate(&orbit, dw);
                    let w = &g * u0;
                    let w_inv = u0_inv * inverse(&g, "group factor")?;
                    let pulled = &w_inv * &m * &w;
                    let split = track.projection.split_unchecked(&pulled);
                    let dg = &w * &split.p_part * u0_inv;
                    let dh = v - &dg * &self.x0;
                    put(&mut out, tl.g, dg.as_slice());
                    put(&mut out, tl.h, dh.as_slice());
                    put(&mut out, tl.xi, (&split.q_part * &xi_prop).as_slice());
                }
            }
        }
        Ok(out)
    }

    fn step_state(&self, lay: &Layout, steps: &[TrackStep], y: &[f64], dw: &[f64], t: f64, scheme: Scheme) -> Result<Vec<f64>> {
        let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(u, v)| u + s * v).collect::<Vec<f64>>();
        match scheme {
            Scheme::Heun => {
                let k1 = self.rhs(lay, steps, y, dw, t)?;
                let k2 = self.rhs(lay, steps, &add(y, &k1, 1.0), dw, t)?;
                Ok(y.iter().zip(k1.iter().zip(&k2)).map(|(u, (a, b))| u + 0.5 * (a + b)).collect())
            }
            Scheme::Rk4 => {
                let k1 = self.rhs(lay, steps, y, dw, t)?;
                let k2 = self.rhs(lay, steps, &add(y, &k1, 0.5), dw, t)?;
                let k3 = self.rhs(lay, steps, &add(y, &k2, 0.5), dw, t)?;
                let k4 = self.rhs(lay, steps, &add(y, &k3, 1.0), dw, t)?;
                Ok((0..y.len())
                    .map(|i| y[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
                    .collect())
            }
        }
    }

    /// Integrates along `driver`; fails on blow-up or loss of invertibility.
    pub fn integrate(&self, driver: &DriverPath, config: &IntegratorConfig) -> Result<Trajectory> {
        if driver.channels() != self.fields.len() {
            return Err(FlowError::Invalid(format!(
                "{} fields but the driver has {} channels (time included)",
                self.fields.len(),
                driver.channels()
            )));
        }
        if config.sample_every == 0 {
            return Err(FlowError::Invalid("sample_every must be at least 1".into()));
        }
        let n = self.dim();
        let lay = self.layout();
        let id = Matrix::identity(n, n);
        let u0 = self.frame.matrix();
        let u0_inv = self.frame.inverse();

        let mut x = self.x0.clone();
        let mut probes = self.probes.clone();
        let mut phi = u0.clone();
        let mut log_det_flow = 0.0;
        let mut states = Vec::with_capacity(self.tracks.len());
        for track in &self.tracks {
            let homogeneous = match track.kind {
                TrackKind::Homogeneous => Some(self.homogeneous_fields(&track.projection)?),
                TrackKind::Left => {
                    self.check_ambient(&track.projection, &self.x0, 0.0)?;
                    None
                }
            };
            states.push(TrackState {
                g: id.clone(),
                h: Vector::zeros(n),
                q: id.clone(),
                log_det_g: 0.0,
                homogeneous,
            });
        }
        let mut max_group_residual = vec![0.0f64; self.tracks.len()];
        let mut reprojections = 0usize;

        let snapshot = |step: usize, t: f64, x: &Vector, phi: &Matrix, ldf: f64, probes: &[Vector], states: &[TrackState]| Sample {
            step,
            t,
            x: x.clone(),
            phi: phi.clone(),
            log_det_flow: ldf,
            probes: probes.to_vec(),
            tracks: states
                .iter()
                .map(|s| TrackSample {
                    xi: AffineTransform { linear: s.g.clone(), translation: s.h.clone() },
                    q_evolved: s.q.clone(),
                    log_det_g: s.log_det_g,
                })
                .collect(),
        };

        let mut samples = vec![snapshot(0, 0.0, &x, &phi, 0.0, &probes, &states)];
        let steps = driver.steps();
        let grid = driver.t_grid();
        for k in 0..steps {
            let dw = driver.increments(k);
            let t_next = grid[k + 1];

            let mut y = vec![0.0; lay.len];
            put(&mut y, 0, x.as_slice());
            for (i, p) in probes.iter().enumerate() {
                put(&mut y, lay.probes + i * n, p.as_slice());
            }
            put(&mut y, lay.psi, id.as_slice());
            let mut track_steps = Vec::with_capacity(states.len());
            for (s, tl) in states.iter().zip(&lay.tracks) {
                put(&mut y, tl.g, if tl.propagated { id.as_slice() } else { s.g.as_slice() });
                put(&mut y, tl.h, s.h.as_slice());
                put(&mut y, tl.xi, id.as_slice());
                let frozen = s.homogeneous.as_ref().map(|coeffs| {
                    let mut a = Matrix::zeros(n, n);
                    let mut b = Vector::zeros(n);
                    for ((aj, bj), &w) in coeffs.iter().zip(dw) {
                        a += aj * w;
                        b.axpy(w, bj, 1.0);
                    }
                    (a, b)
                });
                track_steps.push(TrackStep { g_start: s.g.clone(), g_start_x0: &s.g * &self.x0, frozen });
            }

            let y = self.step_state(&lay, &track_steps, &y, dw, grid[k], config.scheme)?;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(FlowError::BlowUp { t: t_next });
            }

            x = vecn(&y, 0, n);
            for (i, p) in probes.iter_mut().enumerate() {
                *p = vecn(&y, lay.probes + i * n, n);
            }
            let psi = mat(&y, lay.psi, n);
            log_det_flow += log_abs_det(&psi);
            phi = &psi * &phi;

            for (ti, ((s, tl), ts)) in states.iter_mut().zip(&lay.tracks).zip(&track_steps).enumerate() {
                let structure = self.tracks[ti].projection.structure();
                if tl.propagated {
                    let gamma = mat(&y, tl.g, n);
                    s.log_det_g += log_abs_det(&gamma);
                    s.g = &gamma * &ts.g_start;
                } else {
                    s.g = mat(&y, tl.g, n);
                    s.log_det_g = log_abs_det(&s.g);
                }
                s.h = vecn(&y, tl.h, n);
                if self.tracks[ti].kind == TrackKind::Left {
                    let xi_prop = mat(&y, tl.xi, n);
                    s.q = &xi_prop * &s.q;
                }

                if config.reproject {
                    let g_frame = u0_inv * &s.g * u0;
                    let snapped = if structure.kind() == &StructureKind::VolumePreserving {
                        // the accumulated log-determinant stays accurate when G is ill-conditioned
                        let scaled = g_frame * (-s.log_det_g / n as f64).exp();
                        s.log_det_g = 0.0;
                        Some(scaled)
                    } else {
                        match structure.kind() {
                            StructureKind::Isometry | StructureKind::SymplecticUnitary => {
                                Some(structure.reproject_group(&g_frame)?)
                            }
                            _ => None,
                        }
                    };
                    if let Some(g_new_frame) = snapped {
                        let g_new = u0 * g_new_frame * u0_inv;
                        // keep ξ(x0) where it is
                        s.h += (&s.g - &g_new) * &self.x0;
                        if !tl.propagated {
                            s.log_det_g = log_abs_det(&g_new);
                        }
                        s.g = g_new;
                        reprojections += 1;
                    }
                }

                if !s.log_det_g.is_finite() || s.log_det_g.exp() <= tol::GROUP_DET {
                    return Err(FlowError::LostInvertibility { t: t_next });
                }
                ensure_finite(&s.g, "group factor").map_err(|_| FlowError::BlowUp { t: t_next })?;
                let residual = structure.group_residual(&(u0_inv * &s.g * u0));
                max_group_residual[ti] = max_group_residual[ti].max(residual);
            }

            if (k + 1) % config.sample_every == 0 || k + 1 == steps {
                samples.push(snapshot(k + 1, t_next, &x, &phi, log_det_flow, &probes, &states));
            }
        }
        Ok(Trajectory { samples, max_group_residual, steps, reprojections })
    }

    /// Largest `|Ad(ξ^-1)(X_j - Y_j)|` at `ξ^-1(x0)` over the fields of a
    /// homogeneous track, where `Y_j` are its frozen projected fields.
    pub fn homogeneous_remainder_at_fixed_point(&self, projection: &Projection, xi: &AffineTransform) -> Result<f64> {
        let coeffs = self.homogeneous_fields(projection)?;
        let y = xi.apply_inverse(&self.x0)?;
        let image = xi.apply(&y);
        let g_inv = inverse(&xi.linear, "remainder check")?;
        let mut worst = 0.0f64;
        for (f, (a, b)) in self.fields.iter().zip(&coeffs) {
            let diff = f.eval_unchecked(&image) - (a * &image + b);
            worst = worst.max((&g_inv * diff).amax());
        }
        Ok(worst)
    }
}

/// One Stratonovich step of the base point and its linearization.
pub fn step_stratonovich(state: &FlowState, fields: &[VectorField], increments: &[f64], scheme: Scheme) -> Result<FlowState> {
    let n = state.x.len();
    if fields.len() != increments.len() {
        return Err(FlowError::DimensionMismatch { expected: fields.len(), got: increments.len() });
    }
    let system = JointSystem::new(fields.to_vec(), state.x.clone(), Frame::identity(n))?;
    if state.phi.nrows() != n || state.phi.ncols() != n {
        return Err(FlowError::DimensionMismatch { expected: n, got: state.phi.nrows() });
    }
    let lay = system.layout();
    let mut y = vec![0.0; lay.len];
    put(&mut y, 0, state.x.as_slice());
    put(&mut y, lay.psi, Matrix::identity(n, n).as_slice());
    let y = system.step_state(&lay, &[], &y, increments, state.t, scheme)?;
    let t = state.t + increments[0];
    if !y.iter().all(|v| v.is_finite()) {
        return Err(FlowError::BlowUp { t });
    }
    Ok(FlowState { t, x: vecn(&y, 0, n), phi: mat(&y, lay.psi, n) * &state.phi })
}

fn single_track(
    kind: TrackKind,
    spec: &StructureSpec,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, AffineTransform)>> {
    let system = JointSystem::new(fields.to_vec(), x0.clone(), u0.clone())?
        .with_track(Track { projection: Projection::single(spec.clone()), kind })?;
    let traj = system.integrate(driver, config)?;
    Ok(traj.samples.into_iter().map(|s| (s.t, s.tracks[0].xi.clone())).collect())
}

/// Group factor `ξ_t` of the left-invariant equation, sampled per `config`.
pub fn integrate_xi(
    spec: &StructureSpec,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, AffineTransform)>> {
    single_track(TrackKind::Left, spec, fields, driver, x0, u0, config)
}

/// Group factor of the right-invariant equation with projected fields frozen at t = 0.
pub fn integrate_xi_homogeneous(
    spec: &StructureSpec,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, AffineTransform)>> {
    single_track(TrackKind::Homogeneous, spec, fields, driver, x0, u0, config)
}
