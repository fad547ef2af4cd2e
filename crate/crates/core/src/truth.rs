//! Closed-form reference values for builtin scenarios.

use crate::affine::AffineTransform;
use crate::error::Result;
use crate::linalg::{Matrix, Vector};

/// Group factor and vertical factor at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPoint {
    pub xi: AffineTransform,
    pub q: Matrix,
}

#[derive(Debug, Clone, Copy)]
pub enum Truth {
    Decomposition(fn(f64) -> TruthPoint),
    /// Sum of the Lyapunov exponents.
    LyapunovSum(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct TruthEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub truth: Truth,
}

/// Nilpotent control field of the symplectic example, active on [0, 1].
pub fn symplectic_shear() -> Matrix {
    let mut a = Matrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(3, 2)] = -1.0;
    a
}

/// Rotation field of the symplectic example, active from t = 1.
pub fn symplectic_rotation() -> Matrix {
    let mut b = Matrix::zeros(4, 4);
    b[(0, 1)] = -1.0;
    b[(1, 0)] = 1.0;
    b[(2, 3)] = -1.0;
    b[(3, 2)] = 1.0;
    b
}

fn symplectic_point(t: f64) -> TruthPoint {
    let id = Matrix::identity(4, 4);
    let shear = symplectic_shear();
    if t <= 1.0 {
        TruthPoint { xi: AffineTransform::identity(4), q: id + shear * t }
    } else {
        let (s, c) = (t - 1.0).sin_cos();
        let mut g = Matrix::zeros(4, 4);
        for b in [0, 2] {
            g[(b, b)] = c;
            g[(b, b + 1)] = -s;
            g[(b + 1, b)] = s;
            g[(b + 1, b + 1)] = c;
        }
        TruthPoint { xi: AffineTransform { linear: g, translation: Vector::zeros(4) }, q: id + shear }
    }
}

static REGISTRY: [TruthEntry; 2] = [
    TruthEntry {
        name: "paper-symplectic",
        description: "shear on [0,1] then rotation: ξ = I, q = I + tA, then ξ = blockdiag(Rot(t-1), Rot(t-1)), q = I + A",
        truth: Truth::Decomposition(symplectic_point),
    },
    TruthEntry {
        name: "lyapunov-diag",
        description: "drift diag(1,2,3): the Lyapunov sum equals the trace, 6",
        truth: Truth::LyapunovSum(6.0),
    },
];

pub fn lookup(name: &str) -> Option<&'static TruthEntry> {
    REGISTRY.iter().find(|e| e.name == name)
}

pub fn registered() -> &'static [TruthEntry] {
    &REGISTRY
}

/// Sample times `0, k dt, ..., t_end` matching a scenario grid with stride `sample_every`.
pub fn grid_times(t_end: f64, dt: f64, sample_every: usize) -> Result<Vec<f64>> {
    let path = crate::driver::sample_driver(
        &crate::driver::DriverMode::Control { breakpoints: vec![], values: vec![] },
        0,
        t_end,
        dt,
    )?;
    let grid = path.t_grid();
    let last = grid.len() - 1;
    let stride = sample_every.max(1);
    Ok(grid.iter().enumerate().filter(|(k, _)| k % stride == 0 || *k == last).map(|(_, &t)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn symplectic_truth_at_known_times() {
        let Truth::Decomposition(f) = lookup("paper-symplectic").unwrap().truth else { panic!() };
        let p = f(0.5);
        assert_eq!(p.xi, AffineTransform::identity(4));
        let mut expected = Matrix::identity(4, 4);
        expected[(0, 1)] = 0.5;
        expected[(3, 2)] = -0.5;
        assert_eq!(p.q, expected);

        let p = f(2.0);
        let (s, c) = 1.0f64.sin_cos();
        let rot = Matrix::from_row_slice(4, 4, &[c, -s, 0., 0., s, c, 0., 0., 0., 0., c, -s, 0., 0., s, c]);
        assert!(max_abs(&(&p.xi.linear - rot)) < 1e-15);
    }

    #[test]
    fn truth_factors_recompose_the_flow() {
        // φ_t = exp((t-1)B) exp(A) for t ≥ 1
        let Truth::Decomposition(f) = lookup("paper-symplectic").unwrap().truth else { panic!() };
        for t in [1.0, 1.3, 2.0] {
            let p = f(t);
            let flow = crate::linalg::mat_exp(&(symplectic_rotation() * (t - 1.0))).unwrap()
                * crate::linalg::mat_exp(&symplectic_shear()).unwrap();
            assert!(max_abs(&(&p.xi.linear * &p.q - flow)) < 1e-14);
        }
    }

    #[test]
    fn grid_matches_driver_grid() {
        assert_eq!(grid_times(1.0, 0.25, 1).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid_times(1.0, 0.25, 3).unwrap(), vec![0.0, 0.75, 1.0]);
        assert!(lookup("nope").is_none());
    }
}
