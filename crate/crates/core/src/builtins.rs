//! Builtin scenarios. Names are stable identifiers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::integrator::Scheme;
use crate::linalg::matrix_to_rows;
use crate::scenario::{DriverSpec, FieldSpec, OracleCheck, Scenario, Tolerances};
use crate::truth::{symplectic_rotation, symplectic_shear};

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> Scenario,
}

impl Builtin {
    pub fn scenario(&self) -> Scenario {
        (self.build)()
    }
}

static BUILTINS: [Builtin; 5] = [
    Builtin {
        name: "paper-symplectic",
        description: "4-d symplectic control example (shear then rotation) against its closed-form factors",
        build: symplectic_example,
    },
    Builtin {
        name: "qr-oracle",
        description: "3-d linear SDE, isometric factor against QR of the linearization, 10 paths",
        build: qr_oracle,
    },
    Builtin {
        name: "killing-degenerate",
        description: "Killing fields only: trivial remainder and ξ = φ on probe points",
        build: killing_degenerate,
    },
    Builtin {
        name: "lyapunov-diag",
        description: "drift diag(1,2,3), volume structure, Lyapunov sum 6 over T = 50",
        build: lyapunov_diag,
    },
    Builtin {
        name: "cascade-iso-vol-affine",
        description: "isometry ⊂ volume ⊂ affine cascade on a seeded linear flow",
        build: cascade_iso_vol_affine,
    },
];

pub fn builtins() -> &'static [Builtin] {
    &BUILTINS
}

pub fn builtin(name: &str) -> Option<Scenario> {
    BUILTINS.iter().find(|b| b.name == name).map(Builtin::scenario)
}

fn rows(m: &crate::linalg::Matrix) -> Vec<Vec<f64>> {
    matrix_to_rows(m)
}

fn zero_field(n: usize) -> FieldSpec {
    FieldSpec::Affine { a: vec![vec![0.0; n]; n], b: None }
}

fn unit_probes(x0: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(x0.len() + 1);
    out.push(x0.to_vec());
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] += 1.0;
        out.push(p);
    }
    out
}

/// `count` linear fields with uniform entries scaled to unit Frobenius norm
/// (so every operator norm is at most 1), seeded.
pub fn random_linear_fields(seed: u64, n: usize, count: usize) -> Vec<FieldSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let a = raw.chunks(n).map(|r| r.iter().map(|v| v / norm).collect()).collect();
            FieldSpec::Affine { a, b: None }
        })
        .collect()
}

fn symplectic_example() -> Scenario {
    Scenario {
        name: "paper-symplectic".into(),
        description: "shear field on [0,1], rotation field afterwards; origin and canonical frame".into(),
        dimension: 4,
        t_end: 2.0,
        dt: 1e-3,
        scheme: Scheme::Rk4,
        structure: Some("symplectic".into()),
        chain: None,
        reproject: true,
        sample_every: 1,
        x0: vec![0.0; 4],
        u0: None,
        probes: unit_probes(&[0.0; 4]),
        paths: 1,
        seed: 0,
        truth: Some("paper-symplectic".into()),
        checks: vec![OracleCheck::Truth],
        tolerances: Tolerances::default(),
        driver: DriverSpec::Control { breakpoints: vec![0.0, 1.0], values: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        fields: vec![
            zero_field(4),
            FieldSpec::Affine { a: rows(&symplectic_shear()), b: None },
            FieldSpec::Affine { a: rows(&symplectic_rotation()), b: None },
        ],
    }
}

fn qr_oracle() -> Scenario {
    let x0 = vec![0.0; 3];
    Scenario {
        name: "qr-oracle".into(),
        description: "drift plus two noise fields, all linear with unit Frobenius norm".into(),
        dimension: 3,
        t_end: 1.0,
        dt: 1e-3,
        scheme: Scheme::Rk4,
        structure: Some("isometry".into()),
        chain: None,
        reproject: true,
        sample_every: 1,
        probes: unit_probes(&x0),
        x0,
        u0: None,
        paths: 10,
        seed: 1,
        truth: None,
        checks: vec![OracleCheck::Qr],
        tolerances: Tolerances::default(),
        driver: DriverSpec::Brownian,
        fields: random_linear_fields(2024, 3, 3),
    }
}

fn killing_degenerate() -> Scenario {
    let skew = |a: f64, b: f64, c: f64| vec![vec![0.0, -a, b], vec![a, 0.0, -c], vec![-b, c, 0.0]];
    let x0 = vec![0.2, 0.1, -0.4];
    Scenario {
        name: "killing-degenerate".into(),
        description: "skew-linear plus constant fields generate isometries".into(),
        dimension: 3,
        t_end: 1.0,
        dt: 1e-3,
        scheme: Scheme::Rk4,
        structure: Some("isometry".into()),
        chain: None,
        reproject: true,
        sample_every: 1,
        probes: unit_probes(&x0),
        x0,
        u0: None,
        paths: 4,
        seed: 3,
        truth: None,
        checks: vec![OracleCheck::Killing],
        tolerances: Tolerances::default(),
        driver: DriverSpec::Brownian,
        fields: vec![
            FieldSpec::Affine { a: skew(0.3, 0.1, -0.2), b: Some(vec![0.1, 0.0, 0.2]) },
            FieldSpec::Affine { a: skew(0.4, 0.1, 0.3), b: Some(vec![0.1, 0.2, 0.0]) },
            FieldSpec::Affine { a: skew(-0.2, 0.5, 0.1), b: Some(vec![0.0, -0.3, 0.1]) },
        ],
    }
}

fn lyapunov_diag() -> Scenario {
    Scenario {
        name: "lyapunov-diag".into(),
        description: "deterministic linear drift diag(1,2,3); the scalar vertical factor carries the trace".into(),
        dimension: 3,
        t_end: 50.0,
        dt: 1e-3,
        scheme: Scheme::Rk4,
        structure: Some("volume".into()),
        chain: None,
        reproject: true,
        sample_every: 1000,
        x0: vec![0.0; 3],
        u0: None,
        probes: vec![],
        paths: 1,
        seed: 0,
        truth: Some("lyapunov-diag".into()),
        checks: vec![OracleCheck::Lyapunov, OracleCheck::Truth],
        tolerances: Tolerances::default(),
        driver: DriverSpec::Control { breakpoints: vec![], values: vec![] },
        fields: vec![FieldSpec::Affine {
            a: vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]],
            b: None,
        }],
    }
}

fn cascade_iso_vol_affine() -> Scenario {
    let x0 = vec![0.1, 0.2, 0.3];
    Scenario {
        name: "cascade-iso-vol-affine".into(),
        description: "three-level cascade; the top level leaves a trivial remainder".into(),
        dimension: 3,
        t_end: 1.0,
        dt: 1e-3,
        scheme: Scheme::Rk4,
        structure: None,
        chain: Some(vec!["isometry".into(), "volume".into(), "affine".into()]),
        reproject: true,
        sample_every: 1,
        probes: unit_probes(&x0),
        x0,
        u0: None,
        paths: 4,
        seed: 11,
        truth: None,
        checks: vec![],
        tolerances: Tolerances::default(),
        driver: DriverSpec::Brownian,
        fields: random_linear_fields(7, 3, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_names_are_stable() {
        let names: Vec<&str> = builtins().iter().map(|b| b.name).collect();
        assert_eq!(
            names,
            ["paper-symplectic", "qr-oracle", "killing-degenerate", "lyapunov-diag", "cascade-iso-vol-affine"]
        );
        for b in builtins() {
            let s = b.scenario();
            assert_eq!(s.name, b.name);
            s.validate().unwrap();
            assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn random_fields_have_unit_norm() {
        for f in random_linear_fields(5, 4, 3) {
            let FieldSpec::Affine { a, .. } = f else { panic!() };
            let fro: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            assert!((fro - 1.0).abs() < 1e-12);
        }
    }
}
