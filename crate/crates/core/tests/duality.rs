use std::sync::Arc;

use gnslab::closed_forms::{eval_optimizer, Optimizer};
use gnslab::constants::{constants_for, GNParams};
use gnslab::duality::*;
use gnslab::grid::{GridFunction, WeightedGrid};
use gnslab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUPER: [f64; 3] = [2.5, 3.0, 4.0];
const SUB: [f64; 3] = [1.3, 1.5, 1.8];

fn line(a: f64, n: usize) -> Arc<WeightedGrid> {
    Arc::new(WeightedGrid::uniform(-a, a, n).unwrap())
}

fn gauss(grid: &Arc<WeightedGrid>, c: f64, s: f64) -> GridFunction {
    GridFunction::from_fn(grid, |x| (-(x - c).powi(2) / (2.0 * s * s)).exp())
}

fn max_bulk_error(plan: &TransportPlan, exact: impl Fn(f64) -> f64, window: f64) -> f64 {
    plan.map_derivative
        .values
        .iter()
        .zip(plan.source.nodes())
        .filter(|(_, x)| x.abs() <= window)
        .map(|(v, &x)| (v - exact(x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn identical_densities_give_the_identity_map() {
    let g = line(12.0, 1201);
    let f = gauss(&g, 0.0, 1.0);
    let plan = build_transport(&f, &f).unwrap();
    assert!(plan.is_monotone());
    assert!(max_bulk_error(&plan, |x| x, 4.0) < 1e-6);
    for (d, &x) in plan.map_second.values.iter().zip(plan.source.nodes()) {
        if x.abs() < 4.0 {
            assert!((d - 1.0).abs() < 1e-5, "φ″({x}) = {d}");
        }
    }
    assert!(plan.max_pushforward_error() < 1e-10);
}

#[test]
fn translated_density_gives_a_translation() {
    let g = line(14.0, 1401);
    let c = 1.25;
    let plan = build_transport(&gauss(&g, 0.0, 1.0), &gauss(&g, c, 1.0)).unwrap();
    assert!(max_bulk_error(&plan, |x| x + c, 4.0) < 1e-6);
    assert!(plan.max_pushforward_error() < 1e-8);
}

#[test]
fn optimizer_pair_plan_is_the_explicit_map() {
    // F dx = G dy holds for y = sinh x (p > 2) and y = tan x (p < 2)
    for p in [4.0, 2.5, 1.5] {
        let gp = GNParams::new(p).unwrap();
        let (f, g) = optimizer_pair(&gp, 2001, 4096).unwrap();
        let plan = build_transport(&f, &g).unwrap();
        assert!(plan.is_monotone());
        for c in plan.pushforward_battery() {
            assert!(c.error < 1e-4, "p = {p}: {c:?}");
        }
        let err = if p > 2.0 {
            max_bulk_error(&plan, f64::sinh, 3.0) / 3f64.sinh()
        } else {
            max_bulk_error(&plan, f64::tan, 1.2) / 1.2f64.tan()
        };
        assert!(err < 1e-5, "p = {p}: map error {err:e}");
    }
}

#[test]
fn transport_rejects_bad_densities() {
    let g = line(5.0, 101);
    let zero = GridFunction::from_fn(&g, |_| 0.0);
    let f = gauss(&g, 0.0, 1.0);
    assert!(matches!(build_transport(&zero, &f), Err(Error::DivisionByZero(_))));
    assert!(matches!(build_transport(&f, &zero), Err(Error::DivisionByZero(_))));
    let neg = f.map(|v| v - 0.5);
    assert!(matches!(build_transport(&neg, &f), Err(Error::InvalidParams(_))));
    let gp = GNParams::new(4.0).unwrap();
    let sphere = Arc::new(WeightedGrid::nu_p(&gp, 64).unwrap());
    let s = GridFunction::from_fn(&sphere, |_| 1.0);
    assert!(matches!(build_transport(&s, &f), Err(Error::DomainMismatch(_))));
}

#[test]
fn chain_is_nearly_sharp_at_the_optimizers() {
    for p in SUPER.iter().chain(&SUB) {
        let gp = GNParams::new(*p).unwrap();
        let (f, g) = optimizer_pair(&gp, 2001, 4096).unwrap();
        let r = verify_chain(&f, &g, &gp).unwrap();
        for s in r.inequalities() {
            assert!(s.slack >= -1e-7 && s.slack <= 1e-3, "p = {p}: {s:?}");
        }
        let m = r.step(ChainStepName::MomentTransfer);
        assert!((m.lhs - m.rhs).abs() <= 1e-5, "p = {p}: {m:?}");
        for name in [ChainStepName::ChangeOfVariables, ChainStepName::IntegrationByParts] {
            assert!(r.step(name).slack.abs() < 1e-5, "p = {p}: {:?}", r.step(name));
        }
    }
}

#[test]
fn chain_is_strict_for_a_generic_pair() {
    let gp = GNParams::new(4.0).unwrap();
    let f = gauss(&line(12.0, 1201), 0.3, 1.0);
    let g = GridFunction::from_fn(&dual_grid(2048).unwrap(), |y| (1.0 + y * y).powf(-3.0));
    let r = verify_chain(&f, &g, &gp).unwrap();
    assert!(r.min_inequality_slack() >= -1e-7);
    assert!(r.max_inequality_slack() > 1e-2, "{r:?}");
}

fn random_source(rng: &mut ChaCha8Rng, grid: &Arc<WeightedGrid>) -> GridFunction {
    let k = rng.gen_range(1..4);
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.4..1.5), rng.gen_range(0.2..1.0)))
        .collect();
    GridFunction::from_fn(grid, |x| bumps.iter().map(|(c, s, a)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum())
}

fn random_target(rng: &mut ChaCha8Rng, grid: &Arc<WeightedGrid>) -> GridFunction {
    let q = rng.gen_range(2.0..6.0);
    let w = rng.gen_range(0.5..2.0);
    let c = rng.gen_range(-1.0..1.0);
    let a = rng.gen_range(0.0..0.5);
    GridFunction::from_fn(grid, |y| (1.0 + ((y - c) / w).powi(2)).powf(-q) + a * (-(y + c).powi(2)).exp())
}

#[test]
fn chain_inequalities_hold_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let src = line(14.0, 701);
    let tgt = dual_grid(1024).unwrap();
    for p in SUPER.iter().chain(&SUB) {
        let gp = GNParams::new(*p).unwrap();
        for _ in 0..100 {
            let f = random_source(&mut rng, &src);
            let g = random_target(&mut rng, &tgt);
            let r = verify_chain(&f, &g, &gp).unwrap();
            assert!(r.min_inequality_slack() >= -1e-7, "p = {p}: {r:?}");
        }
    }
}

proptest! {
    #[test]
    fn chain_exponents_close_the_argument(p in prop_oneof![2.05f64..10.0, 1.02f64..1.98]) {
        let gp = GNParams::new(p).unwrap();
        let (theta, alpha, r) = chain_exponents(&gp);
        prop_assert!(alpha > 0.0 && alpha < theta && theta < 1.0);
        prop_assert!((alpha / (1.0 - theta) - 1.0 / r - 0.5).abs() < 1e-12);
        let target = if p > 2.0 { 2.0 / p } else { p / 2.0 };
        prop_assert!((1.0 - alpha / theta - target).abs() < 1e-12);
        prop_assert!((theta - gp.dual_exponents().0).abs() < 1e-14);
    }
}

fn primal_closed(gp: &GNParams) -> f64 {
    let t = constants_for(gp).unwrap();
    t.c1_or_c2 / t.c_p
}

#[test]
fn primal_from_the_optimizer_stops_at_once() {
    for p in [4.0, 2.5, 1.5] {
        let gp = GNParams::new(p).unwrap();
        let g = primal_grid(&gp, 1024).unwrap();
        let star = eval_optimizer(&Optimizer::primal(&gp), &g).unwrap();
        let s = solve_primal(&gp, &star).unwrap();
        assert!(s.converged && s.iterations <= 10, "p = {p}: {} iterations", s.iterations);
        assert!((s.value / primal_closed(&gp) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn primal_from_a_gaussian_recovers_the_optimizer() {
    for p in [4.0, 1.5] {
        let gp = GNParams::new(p).unwrap();
        let g = primal_grid(&gp, 1024).unwrap();
        let s = solve_primal(&gp, &start_function(StartKind::Gaussian, &g)).unwrap();
        assert!(s.converged);
        assert!((s.value / primal_closed(&gp) - 1.0).abs() < 1e-4);
        let fit = fit_primal(&s.function, &gp);
        assert!(fit.rel_l2 <= 1e-3, "p = {p}: {fit:?}");
        assert!(fit.x0.abs() < 1e-2);
    }
}

#[test]
fn odd_perturbation_converges_to_a_translate() {
    let gp = GNParams::new(4.0).unwrap();
    let g = primal_grid(&gp, 1024).unwrap();
    let star = Optimizer::primal(&gp);
    let start = GridFunction::from_fn(&g, |x| star.eval_at(x) + 0.2 * x * (-x * x).exp());
    let s = solve_primal(&gp, &start).unwrap();
    assert!((s.value / primal_closed(&gp) - 1.0).abs() < 1e-4);
    let fit = fit_primal(&s.function, &gp);
    assert!(fit.rel_l2 <= 1e-3, "{fit:?}");
    assert!(fit.x0.abs() > 1e-3, "the odd part should shift the centre: {fit:?}");
}

#[test]
fn primal_rejects_bad_starts() {
    let gp = GNParams::new(4.0).unwrap();
    let g = primal_grid(&gp, 256).unwrap();
    assert!(solve_primal(&gp, &GridFunction::from_fn(&g, |_| 0.0)).is_err());
    let tan = Arc::new(WeightedGrid::lebesgue_tan(f64::INFINITY, 1.0, 256).unwrap());
    let r = solve_primal(&gp, &GridFunction::from_fn(&tan, |y| (-y * y).exp()));
    assert!(matches!(r, Err(Error::DomainMismatch(_))));
}

#[test]
fn dual_from_the_optimizer_and_from_a_bump() {
    for p in [4.0, 2.5, 1.5] {
        let gp = GNParams::new(p).unwrap();
        let closed = constants_for(&gp).unwrap().c1_or_c2;
        let dg = dual_grid(4096).unwrap();
        let star = Optimizer::dual(&gp);
        let s = solve_dual(&gp, &GridFunction::from_fn(&dg, |y| star.eval_at(y))).unwrap();
        assert!((s.value / closed - 1.0).abs() < 1e-6, "p = {p}: {}", s.value / closed - 1.0);
        let bump = GridFunction::from_fn(&dg, |y| if y.abs() < 2.0 { 1.0 } else { 0.0 });
        let s = solve_dual(&gp, &bump).unwrap();
        assert!(s.converged && s.function.min() > 0.0);
        assert!((s.value / closed - 1.0).abs() < 1e-4);
        let fit = fit_dual(&s.function, &gp);
        assert!(fit.rel_l2 < 1e-3, "p = {p}: {fit:?}");
    }
}

#[test]
fn parametric_dual_search_matches_the_closed_form() {
    for p in SUPER.iter().chain(&SUB) {
        let gp = GNParams::new(*p).unwrap();
        let closed = constants_for(&gp).unwrap().c1_or_c2;
        let r = parametric_dual(&gp).unwrap();
        assert!((r.exponent - gp.q_dual).abs() < 1e-4 * gp.q_dual, "p = {p}: {r:?}");
        assert!((r.value / closed - 1.0).abs() < 1e-10);
        assert!(r.evaluations < 100);
        let s = solve_dual(&gp, &start_function(StartKind::WideBump, &dual_grid(4096).unwrap())).unwrap();
        assert!(s.iterations * 4096 > r.evaluations, "closed-form moments cost one evaluation each");
    }
}

#[test]
fn dual_rejects_bad_starts() {
    let gp = GNParams::new(4.0).unwrap();
    let dg = dual_grid(256).unwrap();
    assert!(solve_dual(&gp, &GridFunction::from_fn(&dg, |_| 0.0)).is_err());
    assert!(matches!(
        solve_dual(&gp, &GridFunction::from_fn(&dg, |y| y)),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn duality_theorem_holds_from_three_starts() {
    for p in SUPER.iter().chain(&SUB) {
        let gp = GNParams::new(*p).unwrap();
        let reports: Vec<DualityReport> = STARTS.iter().map(|&s| duality_report(&gp, 1024, s).unwrap()).collect();
        for r in &reports {
            assert!(r.theorem_gap <= 2e-4, "{r:?}");
            assert!(r.gap_primal <= 1e-4 && r.gap_dual <= 1e-4, "{r:?}");
            assert!(r.dual_sup_numeric <= r.c_p * r.primal_inf_numeric + 1e-6, "{r:?}");
            assert!(r.primal_fit.rel_l2 <= 1e-3, "{r:?}");
        }
        let spread = |f: &dyn Fn(&DualityReport) -> f64| {
            let v: Vec<f64> = reports.iter().map(f).collect();
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            (hi - lo) / hi
        };
        assert!(spread(&|r| r.primal_inf_numeric) < 1e-4);
        assert!(spread(&|r| r.dual_sup_numeric) < 1e-4);
    }
}

#[test]
fn sweep_preserves_order_and_serializes() {
    let r = duality_sweep(&[4.0, 1.5], 256, StartKind::Gaussian).unwrap();
    assert_eq!(r.iter().map(|x| x.p).collect::<Vec<_>>(), vec![4.0, 1.5]);
    let json = serde_json::to_value(&r[0]).unwrap();
    for key in ["p", "primal_inf_numeric", "dual_sup_numeric", "closed_form", "gap_primal", "gap_dual"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn log_sobolev_brackets_vanish_at_the_gaussian() {
    let r = logsob_limit_check().unwrap();
    assert!(r.gaussian_sup.abs() < 1e-6 && r.gaussian_inf.abs() < 1e-6);
    assert!(r.max_sup <= 1e-7, "{r:?}");
    assert!(r.min_inf >= -1e-7, "{r:?}");
    assert!(r.samples.iter().any(|s| s.sup_side < -1e-3 && s.inf_side > 1e-3));
}

#[test]
fn log_sobolev_closed_forms() {
    let grid = logsob_grid().unwrap();
    // every centred Gaussian is an optimizer of both brackets
    let g2 = GridFunction::from_fn(&grid, |y| 3.0 * (-y * y / 4.0).exp());
    assert!(logsob_sup_bracket(&g2).unwrap().abs() < 1e-8);
    assert!(logsob_inf_bracket(&g2.map(f64::sqrt)).unwrap().abs() < 1e-8);
    let sech = GridFunction::from_fn(&grid, |x| 1.0 / x.cosh());
    let v = logsob_inf_bracket(&sech).unwrap();
    assert!((v - logsob_sech_closed_form()).abs() < 1e-8 && v > 0.0);
}

#[test]
fn log_sobolev_sup_side_is_scale_invariant() {
    let grid = dual_grid(8192).unwrap();
    let base = |y: f64| (1.0 + y * y).powf(-4.0) * (1.0 + 0.3 * y.sin());
    let a = logsob_sup_bracket(&GridFunction::from_fn(&grid, base)).unwrap();
    for lambda in [0.5, 2.0, 3.0] {
        let b = logsob_sup_bracket(&GridFunction::from_fn(&grid, |y| lambda * base(lambda * y))).unwrap();
        assert!((a - b).abs() < 1e-8, "λ = {lambda}: {a} vs {b}");
    }
}
