//! Invariants of the algebraic kernels, the driver and the decomposition,
//! checked on random inputs.

use flowfactor::affine::AffineTransform;
use flowfactor::decomposition::decompose;
use flowfactor::driver::{sample_driver, DriverMode};
use flowfactor::fields::{Polynomial, VectorField};
use flowfactor::integrator::{IntegratorConfig, Scheme};
use flowfactor::linalg::{bracket, determinant, mat_exp, max_abs, qr_positive, Frame, Matrix, Vector};
use flowfactor::scenario::Tolerances;
use flowfactor::structures::{flag_chain, StructureKind, StructureSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_matrix(n: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Matrix::from_row_slice(n, n, &v))
}

fn arb_vector(n: usize, scale: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-scale..scale, n).prop_map(Vector::from_vec)
}

/// Well-conditioned invertible matrices: identity plus a small perturbation.
fn arb_invertible(n: usize) -> impl Strategy<Value = Matrix> {
    arb_matrix(n, 0.3).prop_map(move |m| Matrix::identity(n, n) + m)
}

fn arb_affine(n: usize) -> impl Strategy<Value = AffineTransform> {
    (arb_invertible(n), arb_vector(n, 1.0)).prop_map(|(g, h)| AffineTransform::new(g, h).unwrap())
}

fn arb_spec() -> impl Strategy<Value = StructureSpec> {
    (1usize..=4, 0usize..5).prop_map(|(half, which)| {
        let n = 2 * half;
        match which {
            0 => StructureSpec::parse("isometry", n).unwrap(),
            1 => StructureSpec::parse("volume", n).unwrap(),
            2 => StructureSpec::parse("affine", n).unwrap(),
            3 => StructureSpec::parse("symplectic", n).unwrap(),
            _ if n >= 2 => StructureSpec::new(StructureKind::FlagLevel(vec![1, n - 1]), n).unwrap(),
            _ => unreachable!(),
        }
    })
}

fn arb_polynomial(n: usize) -> impl Strategy<Value = VectorField> {
    (
        arb_vector(n, 1.0),
        arb_matrix(n, 1.0),
        prop::collection::vec(-0.5..0.5, n * n * n),
        prop::collection::vec(-0.2..0.2, n * n * n * n),
    )
        .prop_map(|(c, l, q, k)| VectorField::Polynomial(Polynomial::new(c, l, Some(q), Some(k)).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_projection_pair(spec in arb_spec(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = spec.random_ambient(&mut rng, 2.0);
        let b = spec.random_ambient(&mut rng, 2.0);
        let sa = spec.project(&a).unwrap();
        let sb = spec.project(&b).unwrap();
        prop_assert!(max_abs(&(&sa.p_part + &sa.q_part - &a)) <= 4.0 * f64::EPSILON * max_abs(&a).max(max_abs(&sa.q_part)));
        prop_assert!(spec.in_subalgebra(&sa.p_part));
        prop_assert!(spec.in_complement(&sa.q_part));
        prop_assert!(max_abs(&spec.project(&sa.p_part).unwrap().q_part) <= 1e-12);
        prop_assert!(max_abs(&spec.project(&sa.q_part).unwrap().p_part) <= 1e-12);
        // linearity
        let sum = spec.project(&(&a + &b * 0.5)).unwrap();
        prop_assert!(max_abs(&(&sum.q_part - &sa.q_part - &sb.q_part * 0.5)) <= 1e-12);
        prop_assert!(spec.in_complement(&bracket(&sa.q_part, &sb.q_part).unwrap()));
        if spec.subalgebra_is_closed() {
            prop_assert!(spec.in_subalgebra(&bracket(&sa.p_part, &sb.p_part).unwrap()));
        }
    }

    #[test]
    fn exponentials_land_in_their_groups(spec in arb_spec(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spec.project(&spec.random_ambient(&mut rng, 0.5)).unwrap();
        let g = mat_exp(&s.p_part).unwrap();
        prop_assert!(spec.group_residual(&g) <= 1e-12, "{} {}", spec, spec.group_residual(&g));
        let k = mat_exp(&s.q_part).unwrap();
        prop_assert!(spec.kernel_residual(&k).unwrap() <= 1e-10, "{}", spec);
    }

    #[test]
    fn reprojection_is_idempotent_and_close(spec in arb_spec(), seed in any::<u64>(), eps in 0.0..1e-4f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spec.project(&spec.random_ambient(&mut rng, 0.5)).unwrap();
        let g = mat_exp(&s.p_part).unwrap();
        let n = spec.dim();
        let noisy = &g + Matrix::from_fn(n, n, |i, j| eps * ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let r = spec.reproject_group(&noisy).unwrap();
        prop_assert!(spec.group_residual(&r) <= 1e-10);
        prop_assert!(max_abs(&(&r - &g)) <= 50.0 * eps + 1e-12);
        let rr = spec.reproject_group(&r).unwrap();
        prop_assert!(max_abs(&(&rr - &r)) <= 1e-10);
    }

    #[test]
    fn qr_positive_factors(a in arb_invertible(4)) {
        let (q, r) = qr_positive(&a).unwrap();
        prop_assert!(max_abs(&(q.transpose() * &q - Matrix::identity(4, 4))) <= 1e-13);
        prop_assert!(max_abs(&(&q * &r - &a)) <= 1e-13);
        for i in 0..4 {
            prop_assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                prop_assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn affine_group_laws(a in arb_affine(3), b in arb_affine(3), x in arb_vector(3, 2.0)) {
        let ab = a.compose(&b);
        prop_assert!((ab.apply(&x) - a.apply(&b.apply(&x))).amax() <= 1e-13);
        let back = a.inverse().unwrap().compose(&a);
        prop_assert!((back.apply(&x) - &x).amax() <= 1e-12);
        prop_assert!((a.apply_inverse(&a.apply(&x)).unwrap() - &x).amax() <= 1e-12);
    }

    /// Pulling back by ξ then by η equals pulling back by ξ ∘ η.
    #[test]
    fn adjoint_respects_composition(f in arb_polynomial(2), a in arb_affine(2), b in arb_affine(2), x in arb_vector(2, 1.0)) {
        let lhs = f.adjoint_field(&a).unwrap().adjoint_field(&b).unwrap();
        let rhs = f.adjoint_field(&a.compose(&b)).unwrap();
        let (l, r) = (lhs.jet_at(&x).unwrap(), rhs.jet_at(&x).unwrap());
        prop_assert!((&l.value - &r.value).amax() <= 1e-10 * (1.0 + r.value.amax()));
        prop_assert!(max_abs(&(&l.jacobian - &r.jacobian)) <= 1e-10 * (1.0 + max_abs(&r.jacobian)));
        let undone = rhs.adjoint_field(&a.compose(&b).inverse().unwrap()).unwrap();
        prop_assert!((undone.evaluate(&x).unwrap() - f.evaluate(&x).unwrap()).amax() <= 1e-9 * (1.0 + f.evaluate(&x).unwrap().amax()));
    }

    #[test]
    fn adjoint_pointwise(f in arb_polynomial(3), a in arb_affine(3), x in arb_vector(3, 1.0)) {
        // Ad_ξ X (x) = G^-1 X(ξ x)
        let pulled = f.adjoint_field(&a).unwrap().evaluate(&x).unwrap();
        let direct = a.linear.clone().lu().solve(&f.evaluate(&a.apply(&x)).unwrap()).unwrap();
        prop_assert!((pulled - &direct).amax() <= 1e-10 * (1.0 + direct.amax()));
    }

    #[test]
    fn brownian_paths_are_reproducible_per_stream(seed in any::<u64>(), stream in 0u64..1000, channels in 1usize..4) {
        let mode = DriverMode::Brownian { seed, stream };
        let a = sample_driver(&mode, channels, 0.5, 0.01).unwrap();
        let b = sample_driver(&mode, channels, 0.5, 0.01).unwrap();
        prop_assert_eq!(&a, &b);
        let other = sample_driver(&DriverMode::Brownian { seed, stream: stream + 1 }, channels, 0.5, 0.01).unwrap();
        prop_assert_ne!(a.increments(0), other.increments(0));
        let dt_total: f64 = (0..a.steps()).map(|k| a.increments(k)[0]).sum();
        prop_assert!((dt_total - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn control_increments_integrate_the_control(
        cuts in prop::collection::vec(0.0..2.0f64, 1..4),
        levels in prop::collection::vec(-1.0..1.0f64, 4),
        dt in 0.003..0.2f64,
    ) {
        let mut breakpoints = cuts;
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let values: Vec<Vec<f64>> = breakpoints.iter().zip(&levels).map(|(_, &v)| vec![v]).collect();
        let path = sample_driver(&DriverMode::Control { breakpoints: breakpoints.clone(), values: values.clone() }, 1, 2.0, dt).unwrap();
        let total: f64 = (0..path.steps()).map(|k| path.increments(k)[1]).sum();
        let mut exact = 0.0;
        for (s, v) in values.iter().enumerate() {
            let end = breakpoints.get(s + 1).copied().unwrap_or(2.0).min(2.0);
            exact += v[0] * (end - breakpoints[s]).max(0.0);
        }
        prop_assert!((total - exact).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Φ = G u0 q with G in the group and q in the kernel group, for linear flows.
    #[test]
    fn decomposition_factors_the_linearization(
        which in 0usize..3,
        a0 in arb_matrix(3, 0.5),
        a1 in arb_matrix(3, 0.5),
        u0 in arb_invertible(3),
        stream in 0u64..100,
    ) {
        let name = ["isometry", "volume", "affine"][which];
        let spec = StructureSpec::parse(name, 3).unwrap();
        let fields = vec![VectorField::linear(a0).unwrap(), VectorField::linear(a1).unwrap()];
        let frame = Frame::new(u0).unwrap();
        let driver = sample_driver(&DriverMode::Brownian { seed: 9, stream }, 1, 0.3, 1e-2).unwrap();
        let config = IntegratorConfig { scheme: Scheme::Rk4, reproject: true, sample_every: 5 };
        let x0 = Vector::from_vec(vec![0.1, -0.2, 0.3]);
        let res = decompose(&spec, &fields, &driver, &x0, &frame, &[], &config).unwrap();
        for s in &res.samples {
            let recomposed = &s.xi.linear * frame.matrix() * &s.q;
            prop_assert!(max_abs(&(&recomposed - &s.phi)) <= 1e-10 * (1.0 + max_abs(&s.phi)));
            prop_assert!(s.kernel_residual <= Tolerances::default().kernel, "{} kernel {}", name, s.kernel_residual);
            prop_assert!(s.fixed_point_error <= 1e-9);
            prop_assert!(spec.group_residual(&frame.to_frame(&s.xi.linear)) <= 1e-10);
        }
        let last = res.terminal();
        // Φ carries the frame; the accumulated log-determinant is that of Dφ alone
        let expected = determinant(&last.phi).unwrap().abs().ln() - determinant(frame.matrix()).unwrap().abs().ln();
        prop_assert!((last.log_det_flow - expected).abs() <= 1e-10);
    }
}

#[test]
fn catalog_chains_nest() {
    let levels = |names: &[&str]| names.iter().map(|n| StructureSpec::parse(n, 4).unwrap()).collect::<Vec<_>>();
    assert!(flag_chain(levels(&["isometry", "volume", "affine"])).is_ok());
    assert!(flag_chain(levels(&["symplectic", "volume", "affine"])).is_ok());
    assert!(flag_chain(levels(&["volume", "isometry"])).is_err());
}
