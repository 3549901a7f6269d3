mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{line_integral, rel_err, tanh_sinh};
use gnslab::constants::{constants_for, dual_moments, log_sobolev_fd_estimates, log_sobolev_limits, GNParams};
use gnslab::grid::{GridFunction, WeightedGrid};
use gnslab::special::h_of_q;
use proptest::prelude::*;

const SWEEP: [f64; 9] = [2.1, 2.5, 3.0, 4.0, 5.0, 5.9, 1.1, 1.5, 1.9];

#[test]
fn h_matches_quadrature() {
    for q in [1.0, 1.5, 2.0, 3.0, 4.5] {
        let quad = line_integral(|y| (1.0 + y * y).powf(-q));
        assert!(rel_err(h_of_q(q).unwrap(), quad) < 1e-10, "q = {q}");
    }
}

#[test]
fn defining_integrals_match_gamma_ratios() {
    for p in SWEEP {
        let gp = GNParams::new(p).unwrap();
        let t = constants_for(&gp).unwrap();
        if p > 2.0 {
            let r = 2.0 / (p - 2.0);
            let i2 = line_integral(|x| x.cosh().powf(-2.0 * r));
            assert!(rel_err(t.i2_or_j2, i2) < 1e-8, "I2 at p = {p}");
            let zeta = tanh_sinh(|z| (1.0 - z * z).powf(r), -1.0, 1.0);
            assert!(rel_err(t.zeta_p, zeta) < 1e-8, "zeta at p = {p}");
        } else {
            let r = 2.0 / (2.0 - p);
            let j2 = tanh_sinh(|x| x.cos().powf(2.0 * r), -PI / 2.0, PI / 2.0);
            assert!(rel_err(t.i2_or_j2, j2) < 1e-8, "J2 at p = {p}");
            let zeta = line_integral(|y| (1.0 + y * y).powf(-r));
            assert!(rel_err(t.zeta_p, zeta) < 1e-8, "zeta at p = {p}");
        }
        let q = gp.q_dual;
        let (m0, m2, mm) = dual_moments(&gp).unwrap();
        assert!(rel_err(m0, line_integral(|y| (1.0 + y * y).powf(-q))) < 1e-8);
        assert!(rel_err(m2, line_integral(|y| y * y * (1.0 + y * y).powf(-q))) < 1e-8);
        let m = gp.m_fd;
        assert!(rel_err(mm, line_integral(|y| (1.0 + y * y).powf(-q * m))) < 1e-8, "p = {p}");
    }
}

#[test]
fn i2_at_four_by_quadrature() {
    let i2 = line_integral(|x| 1.0 / x.cosh().powi(2));
    assert!((i2 - 2.0).abs() < 1e-12);
    let t = constants_for(&GNParams::new(4.0).unwrap()).unwrap();
    assert!((t.i2_or_j2 - i2).abs() < 1e-12);
}

#[test]
fn log_sobolev_slopes() {
    let lim = log_sobolev_limits();
    assert_eq!(lim.limit_c1, 1.0);
    assert!((lim.slope - (1.0 + (2.0 * PI).ln())).abs() < 1e-15);
    let (above, below) = log_sobolev_fd_estimates(0.01).unwrap();
    let c1 = constants_for(&GNParams::new(2.01).unwrap()).unwrap().c1_or_c2;
    assert!((c1 - (1.0 + 0.01 * lim.slope / 4.0)).abs() < 2e-3);
    let c2 = constants_for(&GNParams::new(1.99).unwrap()).unwrap().c1_or_c2;
    assert!((c2 - (1.0 + 0.01 * lim.slope / 4.0)).abs() < 2e-3);
    assert!((above - lim.slope).abs() < 0.1 && (below - lim.slope).abs() < 0.1);
}

#[test]
fn constants_are_positive_and_finite() {
    for p in SWEEP.iter().chain(&[1.01, 2.0001, 1.9999, 50.0]) {
        let t = constants_for(&GNParams::new(*p).unwrap()).unwrap();
        for v in [t.c_p, t.i2_or_j2, t.c1_or_c2, t.c_gn, t.zeta_p] {
            assert!(v.is_finite() && v > 0.0, "p = {p}: {t:?}");
        }
    }
}

#[test]
fn truncated_cauchy_integral() {
    // ∫_{−50}^{50} (1+y²)^{−1} = 2 atan 50
    let g = Arc::new(WeightedGrid::uniform(-50.0, 50.0, 4001).unwrap());
    let f = GridFunction::from_fn(&g, |y| 1.0 / (1.0 + y * y));
    assert!((f.integrate() - 2.0 * 50f64.atan()).abs() < 1e-6);
    // the full-line value is reached on a tan-mapped grid
    let g = Arc::new(WeightedGrid::lebesgue_tan(1e8, 1.0, 4000).unwrap());
    let f = GridFunction::from_fn(&g, |y| 1.0 / (1.0 + y * y));
    assert!((f.integrate() - PI).abs() < 1e-6);
}

#[test]
fn second_derivative_of_sine_is_fourth_order() {
    let err = |n: usize| {
        let g = Arc::new(WeightedGrid::uniform(0.0, 3.0, n).unwrap());
        let f = GridFunction::from_fn(&g, f64::sin);
        let d2 = f.derivative(2).unwrap();
        d2.values
            .iter()
            .zip(g.nodes())
            .map(|(v, x)| (v + x.sin()).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(41), err(81));
    assert!(a < 1e-5);
    assert!(a / b > 12.0, "ratio {}", a / b);
    let g = Arc::new(WeightedGrid::uniform(0.0, 3.0, 41).unwrap());
    let c = GridFunction::from_fn(&g, |_| 2.5).derivative(1).unwrap();
    assert!(c.values.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn quadrature_refinement_order() {
    let gp = GNParams::new(4.0).unwrap();
    let exact = tanh_sinh(|z| (1.0 - z * z) * (2.0 * z).exp(), -1.0, 1.0)
        / constants_for(&gp).unwrap().zeta_p;
    let err = |n| {
        let g = Arc::new(WeightedGrid::nu_p(&gp, n).unwrap());
        (GridFunction::from_fn(&g, |z| (2.0 * z).exp()).integrate() - exact).abs()
    };
    assert!(err(32) / err(64).max(1e-16) >= 3.5 || err(64) < 1e-14);
    let exact = 2.0_f64.sin();
    let err = |n| {
        let g = Arc::new(WeightedGrid::uniform(0.0, 2.0, n).unwrap());
        (GridFunction::from_fn(&g, f64::cos).integrate() - exact).abs()
    };
    assert!(err(17) / err(33) >= 3.5);
}

proptest! {
    #[test]
    fn discrete_integration_by_parts(c in -0.5f64..0.5, k in 1.0f64..3.0) {
        // f, g vanish with their derivatives at the ends of [-1, 1]
        let bump = |x: f64| (1.0 - x * x).powi(4);
        let err = |n: usize| {
            let g = Arc::new(WeightedGrid::uniform(-1.0, 1.0, n).unwrap());
            let f = GridFunction::from_fn(&g, |x| bump(x) * (k * x + c).sin());
            let h = GridFunction::from_fn(&g, |x| bump(x) * (1.0 + x * c).exp());
            let fp = f.derivative(1).unwrap();
            let hp = h.derivative(1).unwrap();
            let s: Vec<f64> = (0..g.len()).map(|i| fp.values[i] * h.values[i] + f.values[i] * hp.values[i]).collect();
            g.integrate_values(&s).abs()
        };
        let h = 2.0 / 100.0;
        prop_assert!(err(101) <= 10.0 * h * h);
    }

    #[test]
    fn nu_p_weights_are_probability(p in 2.05f64..8.0, n in 16usize..300) {
        let g = WeightedGrid::nu_p(&GNParams::new(p).unwrap(), n).unwrap();
        let s: f64 = g.weights().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-8);
        prop_assert!(g.weights().iter().all(|&w| w > 0.0));
        prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exponents_recompute(p in 1.01f64..12.0) {
        prop_assume!((p - 2.0).abs() > 1e-6);
        let g = GNParams::new(p).unwrap();
        prop_assert!((g.theta - (p - 2.0) / (2.0 * p)).abs() < 1e-15);
        prop_assert!((g.eta - (2.0 - p) / (2.0 + p)).abs() < 1e-15);
        if let (Some(b), Some(k)) = (g.beta, g.kappa) {
            prop_assert_eq!(k, b * (p - 2.0) + 1.0);
        }
        prop_assert_eq!(g.is_super(), p > 2.0);
    }
}
