//! The quotient `ρ_t = ξ_t^-1 ∘ φ_t`: vertical factors, fixed-point and
//! reconstruction diagnostics, the left variant, cascades along a chain of
//! structures, and the Lyapunov-sum estimate carried by a scalar factor.
//!
//! `ρ_t` is materialized only through its action at x0, its derivative there
//! (the vertical factor `q_t`, defined by `ρ_t* u0 = u0 q_t`) and its values at
//! probe points.

use serde::Serialize;

use crate::affine::AffineTransform;
use crate::driver::DriverPath;
use crate::error::{FlowError, Result};
use crate::fields::VectorField;
use crate::integrator::{IntegratorConfig, JointSystem, Projection, Sample, Scheme, Track, TrackKind, Trajectory};
use crate::linalg::{max_abs, Frame, Matrix, Vector};
use crate::structures::{FlagChain, StructureKind, StructureSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub reproject: bool,
    pub generator: &'static str,
    pub version: &'static str,
}

impl RunMetadata {
    fn new(driver: &DriverPath, config: &IntegratorConfig) -> Self {
        let (seed, stream) = match driver.mode() {
            crate::driver::DriverMode::Brownian { seed, stream } => (Some(*seed), Some(*stream)),
            crate::driver::DriverMode::Control { .. } => (None, None),
        };
        let grid = driver.t_grid();
        Self {
            seed,
            stream,
            dt: grid[1] - grid[0],
            t_end: driver.t_end(),
            scheme: config.scheme,
            reproject: config.reproject,
            generator: crate::driver::GENERATOR,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionSample {
    pub t: f64,
    pub x: Vector,
    pub phi: Matrix,
    pub log_det_flow: f64,
    pub xi: AffineTransform,
    /// `u0^-1 G^-1 Φ`.
    pub q: Matrix,
    /// Vertical factor from its own group equation.
    pub q_evolved: Matrix,
    /// `|ρ_t(x0) - x0|`.
    pub fixed_point_error: f64,
    /// Kernel-group residual of `q` (infinite when `q` is singular or off the group's component).
    pub kernel_residual: f64,
    /// `|q - q_evolved|` relative to `max(1, |q_evolved|)`.
    pub q_consistency: f64,
    /// `φ_t` at the probe points.
    pub probe_images: Vec<Vector>,
    /// `max |ξ_t(ρ_t(p)) - φ_t(p)|` over probes with the affine model of `ρ_t`;
    /// `None` unless every field is affine (then `ρ_t` is affine and the model exact).
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub structure: StructureSpec,
    pub x0: Vector,
    pub frame: Frame,
    pub probes: Vec<Vector>,
    pub samples: Vec<DecompositionSample>,
    pub max_group_residual: f64,
    pub metadata: RunMetadata,
}

fn relative(a: &Matrix, b: &Matrix) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

/// `u0^-1 G^-1 Φ` via an LU solve.
fn extract_vertical(xi: &AffineTransform, phi: &Matrix, frame: &Frame) -> Matrix {
    let z = xi.linear.clone().lu().solve(phi).unwrap_or_else(|| Matrix::from_element(phi.nrows(), phi.ncols(), f64::NAN));
    frame.inverse() * z
}

/// Affine model of the remainder: fixes x0 with derivative `u0 q u0^-1`.
fn remainder_model(q: &Matrix, x0: &Vector, frame: &Frame, y: &Vector) -> Vector {
    x0 + frame.from_frame(q) * (y - x0)
}

fn all_affine(fields: &[VectorField]) -> bool {
    fields.iter().all(VectorField::is_affine)
}

fn level_sample(
    structure: &StructureSpec,
    s: &Sample,
    track: usize,
    x0: &Vector,
    frame: &Frame,
) -> DecompositionSample {
    let ts = &s.tracks[track];
    let q = extract_vertical(&ts.xi, &s.phi, frame);
    let rho_x0 = ts.xi.apply_inverse(&s.x).map(|r| (r - x0).amax()).unwrap_or(f64::INFINITY);
    let kernel_residual = match structure.kernel_residual(&q) {
        Ok(r) if r.is_finite() => r,
        _ => f64::INFINITY,
    };
    DecompositionSample {
        t: s.t,
        x: s.x.clone(),
        phi: s.phi.clone(),
        log_det_flow: s.log_det_flow,
        xi: ts.xi.clone(),
        q_consistency: relative(&q, &ts.q_evolved),
        q,
        q_evolved: ts.q_evolved.clone(),
        fixed_point_error: rho_x0,
        kernel_residual,
        probe_images: s.probes.clone(),
        reconstruction_error: None,
    }
}

fn with_reconstruction(mut d: DecompositionSample, probes: &[Vector], xi: &AffineTransform, x0: &Vector, frame: &Frame) -> DecompositionSample {
    let mut worst = 0.0f64;
    for (p, image) in probes.iter().zip(&d.probe_images) {
        let rebuilt = xi.apply(&remainder_model(&d.q, x0, frame, p));
        worst = worst.max((rebuilt - image).amax());
    }
    d.reconstruction_error = Some(worst);
    d
}

fn build_system(
    fields: &[VectorField],
    x0: &Vector,
    u0: &Frame,
    probes: &[Vector],
    tracks: Vec<Track>,
) -> Result<JointSystem> {
    let mut system = JointSystem::new(fields.to_vec(), x0.clone(), u0.clone())?.with_probes(probes.to_vec())?;
    for t in tracks {
        system = system.with_track(t)?;
    }
    Ok(system)
}

fn collect(
    structure: &StructureSpec,
    traj: &Trajectory,
    track: usize,
    fields: &[VectorField],
    x0: &Vector,
    u0: &Frame,
    probes: &[Vector],
) -> Vec<DecompositionSample> {
    let affine = all_affine(fields);
    traj.samples
        .iter()
        .map(|s| {
            let d = level_sample(structure, s, track, x0, u0);
            if affine {
                let xi = d.xi.clone();
                with_reconstruction(d, probes, &xi, x0, u0)
            } else {
                d
            }
        })
        .collect()
}

/// Integrates the flow and the group factor jointly on one driver path and
/// extracts the remainder diagnostics at every stored time.
pub fn decompose(
    spec: &StructureSpec,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    probes: &[Vector],
    config: &IntegratorConfig,
) -> Result<DecompositionResult> {
    let track = Track { projection: Projection::single(spec.clone()), kind: TrackKind::Left };
    let system = build_system(fields, x0, u0, probes, vec![track])?;
    let traj = system.integrate(driver, config)?;
    Ok(DecompositionResult {
        structure: spec.clone(),
        x0: x0.clone(),
        frame: u0.clone(),
        probes: probes.to_vec(),
        samples: collect(spec, &traj, 0, fields, x0, u0, probes),
        max_group_residual: traj.max_group_residual[0],
        metadata: RunMetadata::new(driver, config),
    })
}

impl DecompositionResult {
    pub fn max_fixed_point_error(&self) -> f64 {
        self.samples.iter().map(|s| s.fixed_point_error).fold(0.0, f64::max)
    }

    pub fn max_kernel_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.kernel_residual).fold(0.0, f64::max)
    }

    pub fn max_q_consistency(&self) -> f64 {
        self.samples.iter().map(|s| s.q_consistency).fold(0.0, f64::max)
    }

    pub fn max_reconstruction_error(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.reconstruction_error).try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
    }

    /// Times at which the vertical factor leaves its kernel group by more than `tolerance`.
    pub fn flagged_times(&self, tolerance: f64) -> Vec<f64> {
        self.samples.iter().filter(|s| !(s.kernel_residual <= tolerance)).map(|s| s.t).collect()
    }

    pub fn terminal(&self) -> &DecompositionSample {
        self.samples.last().expect("at least the initial sample")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeftSample {
    pub t: f64,
    pub xi: AffineTransform,
    /// `ξ_t(x0)`, the moving point fixed by the left remainder `φ_t ∘ ξ_t^-1`.
    pub moving_fixed_point: Vector,
    /// `|φ_t(x0) - ξ_t(x0)|`.
    pub fixed_point_error: f64,
    /// `max |φ_t(p) - ξ_t(p)|` over probes; zero exactly when the left remainder is the identity there.
    pub identity_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeftDecompositionResult {
    pub structure: StructureSpec,
    pub samples: Vec<LeftSample>,
    pub metadata: RunMetadata,
}

impl LeftDecompositionResult {
    pub fn max_fixed_point_error(&self) -> f64 {
        self.samples.iter().map(|s| s.fixed_point_error).fold(0.0, f64::max)
    }

    pub fn max_identity_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.identity_defect).fold(0.0, f64::max)
    }
}

/// The same group factor read as `φ_t = ρ̃_t ∘ ξ_t`, where `ρ̃_t` fixes `ξ_t(x0)`.
pub fn decompose_left(
    spec: &StructureSpec,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    probes: &[Vector],
    config: &IntegratorConfig,
) -> Result<LeftDecompositionResult> {
    let track = Track { projection: Projection::single(spec.clone()), kind: TrackKind::Left };
    let system = build_system(fields, x0, u0, probes, vec![track])?;
    let traj = system.integrate(driver, config)?;
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            let xi = s.tracks[0].xi.clone();
            let moving = xi.apply(x0);
            let identity_defect = probes
                .iter()
                .zip(&s.probes)
                .map(|(p, image)| (image - xi.apply(p)).amax())
                .fold(0.0, f64::max);
            LeftSample {
                t: s.t,
                fixed_point_error: (&s.x - &moving).amax(),
                moving_fixed_point: moving,
                identity_defect,
                xi,
            }
        })
        .collect();
    Ok(LeftDecompositionResult { structure: spec.clone(), samples, metadata: RunMetadata::new(driver, config) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSample {
    pub t: f64,
    /// Successive quotients `ξ^i = (ξ̃^(i-1))^-1 ∘ ξ̃^(i)`.
    pub components: Vec<AffineTransform>,
    /// Per level, the cumulative factor `ξ̃^(i) = ξ^1 ∘ ... ∘ ξ^i`.
    pub cumulative: Vec<AffineTransform>,
    /// Per level, the extracted vertical factor.
    pub q: Vec<Matrix>,
    pub q_evolved: Vec<Matrix>,
    pub kernel_residual: Vec<f64>,
    /// Per level, group residual of the cumulative factor in that level's structure.
    pub group_residual: Vec<f64>,
    /// `max_i |q^(i) - (u0^-1 G_{ξ^(i+1)} u0) q^(i+1)|`, relative, over evolved factors.
    pub telescoping_residual: f64,
    /// `max |ξ^1 ∘ ... ∘ ξ^L ∘ ρ^(L) (p) - φ_t(p)|` over probes (affine fields only).
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub chain: FlagChain,
    pub samples: Vec<CascadeSample>,
    pub max_group_residual: Vec<f64>,
    pub metadata: RunMetadata,
}

impl CascadeResult {
    pub fn max_reconstruction_error(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.reconstruction_error).try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
    }

    pub fn max_telescoping_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.telescoping_residual).fold(0.0, f64::max)
    }

    pub fn max_kernel_residual(&self, level: usize) -> f64 {
        self.samples.iter().map(|s| s.kernel_residual[level]).fold(0.0, f64::max)
    }

    pub fn max_level_group_residual(&self, level: usize) -> f64 {
        self.samples.iter().map(|s| s.group_residual[level]).fold(0.0, f64::max)
    }
}

/// One decomposition per level with the composed projections, all on the same
/// path, split into successive quotients.
pub fn cascade_decompose(
    chain: &FlagChain,
    fields: &[VectorField],
    driver: &DriverPath,
    x0: &Vector,
    u0: &Frame,
    probes: &[Vector],
    config: &IntegratorConfig,
) -> Result<CascadeResult> {
    let levels = chain.len();
    let tracks = (0..levels)
        .map(|i| Track { projection: Projection::chain_level(chain, i), kind: TrackKind::Left })
        .collect();
    let system = build_system(fields, x0, u0, probes, tracks)?;
    let traj = system.integrate(driver, config)?;
    let affine = all_affine(fields);
    let mut samples = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let cumulative: Vec<AffineTransform> = s.tracks.iter().map(|t| t.xi.clone()).collect();
        let mut components = Vec::with_capacity(levels);
        for i in 0..levels {
            components.push(if i == 0 { cumulative[0].clone() } else { cumulative[i - 1].inverse()?.compose(&cumulative[i]) });
        }
        let q: Vec<Matrix> = cumulative.iter().map(|xi| extract_vertical(xi, &s.phi, u0)).collect();
        let q_evolved: Vec<Matrix> = s.tracks.iter().map(|t| t.q_evolved.clone()).collect();
        let kernel_residual = chain
            .levels()
            .iter()
            .zip(&q)
            .map(|(spec, qi)| match spec.kernel_residual(qi) {
                Ok(r) if r.is_finite() => r,
                _ => f64::INFINITY,
            })
            .collect();
        let group_residual = chain
            .levels()
            .iter()
            .zip(&cumulative)
            .map(|(spec, xi)| spec.group_residual(&u0.to_frame(&xi.linear)))
            .collect();
        let mut telescoping_residual = 0.0f64;
        for i in 0..levels.saturating_sub(1) {
            let step = u0.to_frame(&components[i + 1].linear);
            telescoping_residual = telescoping_residual.max(relative(&(step * &q_evolved[i + 1]), &q_evolved[i]));
        }
        let reconstruction_error = affine.then(|| {
            let composed = components.iter().skip(1).fold(components[0].clone(), |acc, c| acc.compose(c));
            probes
                .iter()
                .zip(&s.probes)
                .map(|(p, image)| (composed.apply(&remainder_model(&q[levels - 1], x0, u0, p)) - image).amax())
                .fold(0.0, f64::max)
        });
        samples.push(CascadeSample {
            t: s.t,
            components,
            cumulative,
            q,
            q_evolved,
            kernel_residual,
            group_residual,
            telescoping_residual,
            reconstruction_error,
        });
    }
    Ok(CascadeResult {
        chain: chain.clone(),
        samples,
        max_group_residual: traj.max_group_residual,
        metadata: RunMetadata::new(driver, config),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub t: f64,
    /// `n (1/t) log c_t` with `c_t` the scalar of the evolved vertical factor.
    pub estimate: f64,
    /// `(1/t) log|det Dφ_t(x0)|` from the accumulated step propagators.
    pub oracle: f64,
    /// The same estimate from the extracted factor `u0^-1 G^-1 Φ`, when that factor is scalar.
    pub estimate_extracted: Option<f64>,
}

/// Relative tolerance on the scalar shape of the vertical factor.
const SCALAR_TOL: f64 = 1e-8;

fn scalar_of(q: &Matrix) -> std::result::Result<f64, f64> {
    let n = q.nrows();
    let c = q.trace() / n as f64;
    let residual = max_abs(&(q - Matrix::identity(n, n) * c)) / c.abs().max(f64::MIN_POSITIVE);
    if residual <= SCALAR_TOL && c > 0.0 {
        Ok(c)
    } else {
        Err(residual)
    }
}

/// Sum of Lyapunov exponents read off the scalar vertical factor of a
/// volume-preserving decomposition at its terminal time.
pub fn lyapunov_sum(result: &DecompositionResult, t_min: f64) -> Result<LyapunovEstimate> {
    if result.structure.kind() != &StructureKind::VolumePreserving {
        return Err(FlowError::InvalidStructure(format!(
            "the Lyapunov sum needs the volume structure, got {}",
            result.structure
        )));
    }
    let last = result.terminal();
    if !(t_min > 0.0) || last.t < t_min {
        return Err(FlowError::Invalid(format!("terminal time {} is below t_min = {t_min}", last.t)));
    }
    let n = result.structure.dim() as f64;
    let c = scalar_of(&last.q_evolved).map_err(|residual| FlowError::NonScalarFactor { residual })?;
    let estimate_extracted = scalar_of(&last.q).ok().map(|c| n * c.ln() / last.t);
    Ok(LyapunovEstimate { t: last.t, estimate: n * c.ln() / last.t, oracle: last.log_det_flow / last.t, estimate_extracted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// `max_t |q_t q̃_t^-1 - I|`.
    pub max_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares two vertical-factor series of the same path: equal factors up to
/// `tolerance` means the two decompositions coincide.
pub fn uniqueness_check(q: &[Matrix], q_other: &[Matrix], tolerance: f64) -> Result<UniquenessReport> {
    if q.len() != q_other.len() {
        return Err(FlowError::DimensionMismatch { expected: q.len(), got: q_other.len() });
    }
    let mut max_defect = 0.0f64;
    for (a, b) in q.iter().zip(q_other) {
        let defect = match b.clone().try_inverse() {
            Some(b_inv) => max_abs(&(a * b_inv - Matrix::identity(a.nrows(), a.ncols()))),
            None => f64::INFINITY,
        };
        max_defect = max_defect.max(defect);
    }
    Ok(UniquenessReport { max_defect, tolerance, passed: max_defect <= tolerance })
}
