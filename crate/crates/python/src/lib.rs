//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use ff::builtins::{builtin, builtins};
use ff::decomposition;
use ff::driver::{sample_driver, DriverMode};
use ff::integrator::{IntegratorConfig, Scheme};
use ff::linalg::{self, matrix_from_rows, matrix_to_rows, Frame, Matrix, Vector};
use ff::report::{export_truth_csv, run_scenario, write_artifacts};
use ff::scenario::{FieldSpec, Scenario};
use ff::structures::StructureSpec;
use ff::FlowError;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<f64>>;

fn py_err(e: FlowError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat(rows: &Rows) -> PyResult<Matrix> {
    matrix_from_rows(rows).map_err(py_err)
}

#[pyfunction]
fn bracket(a: Rows, b: Rows) -> PyResult<Rows> {
    Ok(matrix_to_rows(&linalg::bracket(&mat(&a)?, &mat(&b)?).map_err(py_err)?))
}

#[pyfunction]
fn mat_exp(a: Rows) -> PyResult<Rows> {
    Ok(matrix_to_rows(&linalg::mat_exp(&mat(&a)?).map_err(py_err)?))
}

/// `(Q, R)` with `R` having a positive diagonal.
#[pyfunction]
fn qr_positive(a: Rows) -> PyResult<(Rows, Rows)> {
    let (q, r) = linalg::qr_positive(&mat(&a)?).map_err(py_err)?;
    Ok((matrix_to_rows(&q), matrix_to_rows(&r)))
}

/// A structure by canonical name ("isometry", "volume", "affine",
/// "symplectic", "flag:k1,k2,...") in dimension `n`.
#[pyclass(name = "Structure", frozen)]
struct PyStructure {
    spec: StructureSpec,
}

#[pymethods]
impl PyStructure {
    #[new]
    fn new(name: &str, n: usize) -> PyResult<Self> {
        Ok(Self { spec: StructureSpec::parse(name, n).map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `(p_part, q_part)` of a matrix in the ambient algebra.
    fn project(&self, a: Rows) -> PyResult<(Rows, Rows)> {
        let s = self.spec.project(&mat(&a)?).map_err(py_err)?;
        Ok((matrix_to_rows(&s.p_part), matrix_to_rows(&s.q_part)))
    }

    fn kernel_residual(&self, g: Rows) -> PyResult<f64> {
        self.spec.kernel_residual(&mat(&g)?).map_err(py_err)
    }

    fn kernel_membership(&self, g: Rows) -> PyResult<bool> {
        self.spec.kernel_membership(&mat(&g)?).map_err(py_err)
    }

    fn group_residual(&self, g: Rows) -> PyResult<f64> {
        Ok(self.spec.group_residual(&mat(&g)?))
    }

    fn reproject(&self, g: Rows) -> PyResult<Rows> {
        Ok(matrix_to_rows(&self.spec.reproject_group(&mat(&g)?).map_err(py_err)?))
    }

    fn __repr__(&self) -> String {
        format!("Structure('{}', {})", self.spec.name(), self.spec.dim())
    }
}

/// `[(name, description), ...]`
#[pyfunction]
fn list_builtins() -> Vec<(String, String)> {
    builtins().iter().map(|b| (b.name.to_string(), b.description.to_string())).collect()
}

#[pyfunction]
fn builtin_toml(name: &str) -> PyResult<String> {
    let s = builtin(name).ok_or_else(|| PyValueError::new_err(format!("no builtin scenario named '{name}'")))?;
    s.to_toml().map_err(py_err)
}

/// Runs a builtin (by name) or a TOML scenario text and returns the report as JSON.
/// Artifacts are written only when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (scenario, *, dt=None, t_end=None, paths=None, seed=None, scheme=None, reproject=None, out_dir=None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    scenario: &str,
    dt: Option<f64>,
    t_end: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
    scheme: Option<&str>,
    reproject: Option<bool>,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let mut s = match builtin(scenario) {
        Some(s) => s,
        None => Scenario::from_toml(scenario).map_err(py_err)?,
    };
    if let Some(v) = dt {
        s.dt = v;
    }
    if let Some(v) = t_end {
        s.t_end = v;
    }
    if let Some(v) = paths {
        s.paths = v;
    }
    if let Some(v) = seed {
        s.seed = v;
    }
    if let Some(v) = scheme {
        s.scheme = v.parse().map_err(|e: FlowError| py_err(e))?;
    }
    if let Some(v) = reproject {
        s.reproject = v;
    }
    let output = py.detach(|| run_scenario(&s)).map_err(py_err)?;
    if let Some(root) = out_dir {
        write_artifacts(&output, &root).map_err(py_err)?;
    }
    output.report.to_json().map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (name, *, t_end=None, dt=None))]
fn export_truth(name: &str, t_end: Option<f64>, dt: Option<f64>) -> PyResult<String> {
    let s = builtin(name).ok_or_else(|| PyValueError::new_err(format!("no builtin scenario named '{name}'")))?;
    export_truth_csv(name, t_end.unwrap_or(s.t_end), dt.unwrap_or(s.dt), s.sample_every).map_err(py_err)
}

/// Decomposes the flow of `fields` (drift first, then one field per noise
/// channel, each `(A, b)` or `(A, None)`) through `structure` and returns the
/// sampled factors as a dict of lists.
///
/// Without `controls` the channels are Brownian from `(seed, stream)`;
/// `controls = (breakpoints, values)` gives piecewise-constant channels.
#[pyfunction]
#[pyo3(signature = (structure, fields, x0, t_end, dt, *, seed=0, stream=0, controls=None, scheme="rk4", reproject=true, sample_every=1))]
#[allow(clippy::too_many_arguments)]
fn decompose<'py>(
    py: Python<'py>,
    structure: &str,
    fields: Vec<(Rows, Option<Vec<f64>>)>,
    x0: Vec<f64>,
    t_end: f64,
    dt: f64,
    seed: u64,
    stream: u64,
    controls: Option<(Vec<f64>, Rows)>,
    scheme: &str,
    reproject: bool,
    sample_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = x0.len();
    let spec = StructureSpec::parse(structure, n).map_err(py_err)?;
    let built = fields
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| FieldSpec::Affine { a, b }.build(n, &format!("fields[{i}]")))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    if built.is_empty() {
        return Err(PyValueError::new_err("fields: at least the drift is required"));
    }
    let mode = match controls {
        Some((breakpoints, values)) => DriverMode::Control { breakpoints, values },
        None => DriverMode::Brownian { seed, stream },
    };
    let config = IntegratorConfig { scheme: scheme.parse::<Scheme>().map_err(py_err)?, reproject, sample_every };
    let x0 = Vector::from_vec(x0);
    let res = py
        .detach(|| {
            let driver = sample_driver(&mode, built.len() - 1, t_end, dt)?;
            decomposition::decompose(&spec, &built, &driver, &x0, &Frame::identity(n), &[], &config)
        })
        .map_err(py_err)?;

    let out = PyDict::new(py);
    let col = |f: &dyn Fn(&decomposition::DecompositionSample) -> Rows| res.samples.iter().map(f).collect::<Vec<_>>();
    out.set_item("structure", spec.name())?;
    out.set_item("t", res.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
    out.set_item("x", res.samples.iter().map(|s| s.x.iter().copied().collect()).collect::<Vec<Vec<f64>>>())?;
    out.set_item("phi", col(&|s| matrix_to_rows(&s.phi)))?;
    out.set_item("xi_linear", col(&|s| matrix_to_rows(&s.xi.linear)))?;
    out.set_item(
        "xi_translation",
        res.samples.iter().map(|s| s.xi.translation.iter().copied().collect()).collect::<Vec<Vec<f64>>>(),
    )?;
    out.set_item("q", col(&|s| matrix_to_rows(&s.q)))?;
    out.set_item("q_evolved", col(&|s| matrix_to_rows(&s.q_evolved)))?;
    out.set_item("log_det_flow", res.samples.iter().map(|s| s.log_det_flow).collect::<Vec<_>>())?;
    out.set_item("kernel_residual", res.samples.iter().map(|s| s.kernel_residual).collect::<Vec<_>>())?;
    out.set_item("fixed_point_error", res.samples.iter().map(|s| s.fixed_point_error).collect::<Vec<_>>())?;
    out.set_item("max_group_residual", res.max_group_residual)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "flowfactor")]
fn flowfactor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStructure>()?;
    m.add_function(wrap_pyfunction!(bracket, m)?)?;
    m.add_function(wrap_pyfunction!(mat_exp, m)?)?;
    m.add_function(wrap_pyfunction!(qr_positive, m)?)?;
    m.add_function(wrap_pyfunction!(list_builtins, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(export_truth, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
