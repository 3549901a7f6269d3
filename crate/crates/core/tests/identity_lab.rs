use std::sync::Arc;

use gnslab::constants::GNParams;
use gnslab::grid::{GridFunction, NuKind, WeightedGrid};
use gnslab::identity_lab::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * k as f64);
    }
    s * h / 3.0
}

/// The two specializations used on the interval and on the line.
fn specializations(n: usize) -> Vec<AbOperatorSpec> {
    let d = 4.0;
    let p: f64 = 1.5;
    vec![
        AbOperatorSpec::on_interval(1.0, d / 2.0 - 1.0, NuKind::OneMinusZ2, -0.95, 0.95, n).unwrap(),
        AbOperatorSpec::on_interval(1.0, -2.0 / (2.0 - p), NuKind::OnePlusY2, -4.0, 4.0, n).unwrap(),
    ]
}

#[test]
fn constants_give_zero_on_both_sides() {
    for spec in specializations(101) {
        let u = GridFunction::from_fn(&spec.grid, |_| 2.0);
        for c in [verify_identity_1(&u, &spec).unwrap(), verify_identity_2(&u, &spec).unwrap()] {
            assert!(c.lhs.abs() < 1e-20 && c.rhs.abs() < 1e-20, "{c:?}");
        }
    }
}

#[test]
fn interval_specialization_first_identity() {
    let d = 4.0;
    let spec = AbOperatorSpec::on_interval(1.0, d / 2.0 - 1.0, NuKind::OneMinusZ2, -1.0, 1.0, 801).unwrap();
    let u = GridFunction::from_fn(&spec.grid, |z| z * (1.0 - z * z));
    let c = verify_identity_1(&u, &spec).unwrap();
    assert!(c.mismatch <= 1e-6, "{c:?}");
    assert_eq!(spec.first_coefficient() * 2.0, d);
    // ∫|u″|²ν² + d∫|u′|²ν in dµ_b = ν dz, from closed-form derivatives
    let nu = |z: f64| 1.0 - z * z;
    let reference = simpson(|z| 36.0 * z * z * nu(z).powi(3), -1.0, 1.0, 4000)
        + d * simpson(|z| (1.0 - 3.0 * z * z).powi(2) * nu(z).powi(2), -1.0, 1.0, 4000);
    assert!((c.lhs - reference).abs() <= 1e-8 * reference, "{} vs {reference}", c.lhs);
}

#[test]
fn line_specialization_first_identity() {
    let p: f64 = 1.5;
    let spec = &specializations(801)[1];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_tapered(spec, &mut rng);
    let c = verify_identity_1(&u, spec).unwrap();
    assert!(c.mismatch <= 1e-5, "{c:?}");
    // ∫(𝖫u)² = ∫|u″|²ξ² + (2p/(2−p))∫|u′|²ξ
    assert!((spec.first_coefficient() * -2.0 - 2.0 * p / (2.0 - p)).abs() < 1e-14);
    let d1 = u.derivative(1).unwrap();
    let d2 = u.derivative(2).unwrap();
    let vals: Vec<f64> = u
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let xi = 1.0 + y * y;
            d2.values[i].powi(2) * xi * xi + 2.0 * p / (2.0 - p) * d1.values[i].powi(2) * xi
        })
        .collect();
    let special = spec.grid.integrate_values(&vals);
    assert!((special - c.lhs).abs() <= 1e-5 * c.lhs.abs());
}

#[test]
fn second_identity_coefficients() {
    let d = 4.0;
    let p: f64 = 1.5;
    let specs = specializations(401);
    let (c4, c2) = specs[0].second_coefficients().unwrap();
    assert!((c4 - d / (d + 2.0)).abs() < 1e-15 && (c2 - 2.0 * (d - 1.0) / (d + 2.0)).abs() < 1e-15);
    let (c4, c2) = specs[1].second_coefficients().unwrap();
    assert!((c4 - p / (2.0 * (p - 1.0))).abs() < 1e-14);
    assert!((c2 - (p + 2.0) / (2.0 * (p - 1.0))).abs() < 1e-14);
    for spec in &specs {
        let u = tapered(spec, 2.0, |z| (std::f64::consts::PI * z).sin());
        let c = verify_identity_2(&u, spec).unwrap();
        assert!(c.mismatch <= 1e-5, "{c:?}");
    }
}

#[test]
fn singular_second_coefficient_is_reported() {
    let spec = AbOperatorSpec::on_interval(1.0, -2.0, NuKind::OnePlusY2, -2.0, 2.0, 51).unwrap();
    let u = tapered(&spec, 3.0, |y| y);
    assert!(verify_identity_2(&u, &spec).is_err());
    assert!(verify_identity_1(&u, &spec).is_ok());
}

#[test]
fn spec_validation() {
    let g = Arc::new(WeightedGrid::uniform(-1.0, 1.0, 33).unwrap());
    assert!(AbOperatorSpec::new(1.0, 0.5, NuKind::OneMinusZ2, g).is_err());
    let g = Arc::new(WeightedGrid::weighted_uniform(NuKind::OneMinusZ2, 0.5, -0.5, 0.5, 33).unwrap());
    assert!(AbOperatorSpec::new(0.0, 0.5, NuKind::OneMinusZ2, g.clone()).is_err());
    assert!(AbOperatorSpec::new(1.0, 0.7, NuKind::OneMinusZ2, g.clone()).is_err());
    assert!(AbOperatorSpec::new(1.0, 0.5, NuKind::OnePlusY2, g).is_err());
    assert!(AbOperatorSpec::on_interval(0.5, 1.0, NuKind::OneMinusZ2, -1.0, 1.0, 33).is_err());
}

// Twenty random tapered functions for each specialization, with the
// mismatch falling at least fourfold when the grid is doubled.
#[test]
fn random_tapered_functions_both_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..20 {
        let state: u64 = rng.gen();
        for which in 0..2 {
            let mut prev: Option<(f64, f64)> = None;
            for n in [201, 401, 801] {
                let spec = &specializations(n)[which];
                let mut r = ChaCha8Rng::seed_from_u64(state);
                let u = random_tapered(spec, &mut r);
                let (i1, i2) = (verify_identity_1(&u, spec).unwrap(), verify_identity_2(&u, spec).unwrap());
                if n == 801 {
                    assert!(i1.mismatch <= 1e-5 && i2.mismatch <= 1e-5, "k={k} which={which} {i1:?} {i2:?}");
                }
                if let Some((m1, m2)) = prev {
                    assert!(m1 / i1.mismatch >= 4.0 && m2 / i2.mismatch >= 4.0, "k={k} which={which} n={n}");
                }
                prev = Some((i1.mismatch, i2.mismatch));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn identities_hold_for_general_exponents(a in 0.3f64..2.5, b in -1.5f64..2.0, line in any::<bool>(), seed in 0u64..1000) {
        prop_assume!((2.0 * a + b).abs() > 0.2);
        let spec = if line {
            AbOperatorSpec::on_interval(a, b, NuKind::OnePlusY2, -3.0, 3.0, 801).unwrap()
        } else {
            AbOperatorSpec::on_interval(a, b, NuKind::OneMinusZ2, -0.9, 0.9, 801).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_tapered(&spec, &mut rng);
        prop_assert!(verify_identity_1(&u, &spec).unwrap().mismatch <= 1e-5);
        prop_assert!(verify_identity_2(&u, &spec).unwrap().mismatch <= 1e-5);
    }
}

#[test]
fn constant_solves_the_equation() {
    for p in [4.0, 3.0, 1.5] {
        let gp = GNParams::new(p).unwrap();
        let lambda = 0.7;
        let g = Arc::new(WeightedGrid::ultraspherical(&gp, 64).unwrap());
        let c = constant_solution(p, lambda);
        let r = rigidity_solve(&gp, lambda, &GridFunction::from_fn(&g, |_| c)).unwrap();
        assert_eq!(r.class, RigidityClass::Constant);
        assert!(r.residual < 1e-12 * c.max(1.0));
        assert_eq!(r.iterations, 0);
        let id = rigidity_identity_check(&r.solution, &gp, lambda).unwrap();
        assert!(id.term1.abs() < 1e-20 && id.term2.abs() < 1e-20);
    }
}

#[test]
fn below_threshold_every_start_is_constant() {
    let gp = GNParams::new(4.0).unwrap();
    assert_eq!(gp.threshold(), 2.0);
    for lambda in [0.5, 1.0, 1.5] {
        let runs = rigidity_multistart(&gp, lambda, 128, 20, 0.5, 17).unwrap();
        assert_eq!(runs.len(), 20);
        for r in &runs {
            assert_eq!(r.class, RigidityClass::Constant, "λ={lambda} dev {}", r.deviation);
            assert!(r.residual <= 1e-6);
            let id = rigidity_identity_check(&r.solution, &gp, lambda).unwrap();
            assert!(id.coefficient > 0.0);
            assert!(id.sum.abs() <= 1e-5);
            assert!(id.term1 >= -1e-9 && id.term2 >= -1e-9);
            assert!(id.orthogonality.abs() <= 1e-6);
        }
    }
}

#[test]
fn subcritical_rigidity() {
    let gp = GNParams::new(1.5).unwrap();
    assert!((gp.threshold() - 12.0).abs() < 1e-12);
    for lambda in [3.0, 8.0] {
        for r in rigidity_multistart(&gp, lambda, 128, 10, 0.5, 5).unwrap() {
            assert_eq!(r.class, RigidityClass::Constant);
            let id = rigidity_identity_check(&r.solution, &gp, lambda).unwrap();
            assert!(id.term1 >= -1e-9 && id.term2 >= -1e-9);
        }
    }
}

// Above the threshold the even branch through the k = 2 eigenvalue of the
// linearization carries nonconstant solutions; λ = 3 is reached by
// continuation from λ = 4.
#[test]
fn nonconstant_solutions_above_threshold() {
    let gp = GNParams::new(4.0).unwrap();
    let runs = rigidity_multistart(&gp, 4.0, 128, 20, 0.5, 1).unwrap();
    let start = runs
        .iter()
        .find(|r| r.class == RigidityClass::Nonconstant)
        .expect("a nonconstant solution at λ = 4");
    let lambdas: Vec<f64> = (1..=20).map(|k| 4.0 - 0.05 * k as f64).collect();
    let branch = continue_branch(&gp, &start.solution, &lambdas).unwrap();
    let (lambda, at3) = branch.last().unwrap();
    assert!((lambda - 3.0).abs() < 1e-9);
    assert_eq!(at3.class, RigidityClass::Nonconstant);
    let id = rigidity_identity_check(&at3.solution, &gp, 3.0).unwrap();
    assert!(id.coefficient < 0.0);
    assert!(id.term1 < 0.0 && id.term2 > 0.0);
    // the identity sum and the orthogonality shrink under refinement
    let fine = Arc::new(WeightedGrid::nu_p(&gp, 256).unwrap());
    let coarse = &at3.solution;
    let guess = GridFunction::from_fn(&fine, |z| {
        let nodes = coarse.grid.nodes();
        coarse.grid.interpolate(&coarse.values, z.clamp(nodes[0], nodes[nodes.len() - 1]))
    });
    let refined = rigidity_solve(&gp, 3.0, &guess).unwrap();
    assert_eq!(refined.class, RigidityClass::Nonconstant);
    let id_fine = rigidity_identity_check(&refined.solution, &gp, 3.0).unwrap();
    assert!(id.sum.abs() / id_fine.sum.abs() >= 3.0, "{} -> {}", id.sum, id_fine.sum);
    assert!(id_fine.orthogonality.abs() < id.orthogonality.abs());
    assert!((refined.deviation - at3.deviation).abs() < 0.05);
}

#[test]
fn odd_perturbations_return_to_the_constant() {
    let gp = GNParams::new(4.0).unwrap();
    let g = Arc::new(WeightedGrid::nu_p(&gp, 128).unwrap());
    let c = constant_solution(4.0, 3.0);
    for eps in [0.3, 0.9] {
        let r = rigidity_solve(&gp, 3.0, &GridFunction::from_fn(&g, |z| c * (1.0 + eps * z))).unwrap();
        assert_eq!(r.class, RigidityClass::Constant);
    }
}

#[test]
fn rigidity_input_checks() {
    let g6 = GNParams::new(6.0).unwrap();
    let g = Arc::new(WeightedGrid::nu_p(&g6, 32).unwrap());
    let e = rigidity_solve(&g6, 1.0, &GridFunction::from_fn(&g, |_| 1.0)).unwrap_err();
    assert!(e.to_string().contains("p = 6"));
    let g4 = GNParams::new(4.0).unwrap();
    let g = Arc::new(WeightedGrid::nu_p(&g4, 32).unwrap());
    assert!(rigidity_solve(&g4, -1.0, &GridFunction::from_fn(&g, |_| 1.0)).is_err());
    assert!(rigidity_solve(&g4, 1.0, &GridFunction::from_fn(&g, |_| -1.0)).is_err());
    let other = Arc::new(WeightedGrid::uniform(-1.0, 1.0, 32).unwrap());
    assert!(rigidity_solve(&g4, 1.0, &GridFunction::from_fn(&other, |_| 1.0)).is_err());
}

#[test]
fn scan_brackets_the_threshold() {
    let gp = GNParams::new(4.0).unwrap();
    let rows = lambda_scan(&gp, 96, 0.05, 6, 3).unwrap();
    assert_eq!(rows.len(), 73);
    assert!((rows[0].lambda - 0.4).abs() < 1e-12 && (rows[72].lambda - 4.0).abs() < 1e-9);
    for r in rows.iter().filter(|r| r.lambda < 2.0) {
        assert_eq!(r.nonconstant, 0, "λ = {}", r.lambda);
        assert!(r.constant >= 5);
    }
    for r in rows.iter().filter(|r| r.lambda < 1.5) {
        assert_eq!(r.constant, 6, "λ = {}", r.lambda);
    }
    assert!(rows.iter().any(|r| r.lambda > 2.0 && r.nonconstant > 0));
    let again = lambda_scan(&gp, 96, 0.05, 6, 3).unwrap();
    assert_eq!(rows, again);
}
