//! One runner per command. Each returns the `results` map and the checks;
//! per-exponent traces are written by the worker that computed them.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::output::{Cell, Checks, Csv};
use crate::closed_forms::{eval_optimizer, Optimizer};
use crate::constants::{constants_for, log_sobolev_fd_estimates, log_sobolev_limits, GNParams};
use crate::dual_flows::{gaussian_entropy, heat_entropy_production, run_fd, FdConfig, FdMode};
use crate::duality::{duality_report, logsob_limit_check, DualityReport, STARTS};
use crate::flow::{manifold_profile, normalize_initial, run_flow, FlowConfig, FlowTrace, Frame};
use crate::functionals::{convexity_probe, primal_quotient};
use crate::grid::{GridFunction, NuKind, WeightedGrid};
use crate::identity_lab::{lambda_scan, random_tapered, verify_identity_1, verify_identity_2, AbOperatorSpec, ScanRow};

pub type Outcome = std::result::Result<(Value, Checks), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn params(p: f64) -> Result<GNParams, String> {
    GNParams::new(p).map_err(err)
}

fn file_tag(p: f64) -> String {
    format!("p{p}")
}

fn write_csv(csv: &Csv, dir: &Path, name: &str) -> Result<String, String> {
    csv.write(&dir.join(name)).map_err(|e| format!("cannot write {name}: {e}"))?;
    Ok(name.to_string())
}

/// Runs `f` for every exponent on the worker pool, keeping input order.
fn per_p<F>(cfg: &RunConfig, f: F) -> Outcome
where
    F: Fn(f64) -> Outcome + Sync,
{
    let out: Vec<_> = cfg.p.par_iter().map(|&p| f(p)).collect();
    let mut runs = Vec::with_capacity(out.len());
    let mut checks = Checks::default();
    for r in out {
        let (v, c) = r?;
        runs.push(v);
        checks.extend(c);
    }
    Ok((json!({ "runs": runs }), checks))
}

fn constants_one(p: f64, n: usize, tol: f64) -> Outcome {
    let gp = params(p)?;
    let t = constants_for(&gp).map_err(err)?;
    let grid = if gp.is_super() {
        WeightedGrid::uniform(-40.0 / gp.profile_exponent().min(1.0), 40.0 / gp.profile_exponent().min(1.0), n)
    } else {
        WeightedGrid::midpoint(-PI / 2.0, PI / 2.0, n)
    }
    .map_err(err)?;
    let f = eval_optimizer(&Optimizer::primal(&gp), &Arc::new(grid)).map_err(err)?;
    let q = primal_quotient(&f, &gp).map_err(err)?;
    let part = |k: &str| q.part(k).unwrap_or(f64::NAN);
    let (grad, l2, lp) = (part("gradient"), part("l2"), part("lp"));
    let ratio_gradient = grad / l2 * (p - 2.0).abs() * (p + 2.0) / 4.0;
    let ratio_lp = lp / l2 * (p + 2.0) / 4.0;
    let mut c = Checks::default();
    let tag = |what: &str| format!("constants.p{p}.{what}");
    c.rel(&tag("l2_norm"), t.i2_or_j2, l2, tol);
    c.rel(&tag("lp_norm"), 4.0 / (p + 2.0) * t.i2_or_j2, lp, tol);
    c.rel(&tag("gradient_norm"), 4.0 / ((p - 2.0).abs() * (p + 2.0)) * t.i2_or_j2, grad, tol);
    c.abs(&tag("ratio_gradient"), 1.0, ratio_gradient, tol);
    c.abs(&tag("ratio_lp"), 1.0, ratio_lp, tol);
    let v = json!({
        "p": p,
        "c_p": t.c_p,
        "i2_or_j2": t.i2_or_j2,
        "c1_or_c2": t.c1_or_c2,
        "c_gn": t.c_gn,
        "zeta_p": t.zeta_p,
        "quadrature": { "l2": l2, "lp": lp, "gradient": grad },
        "ratio_gradient": ratio_gradient,
        "ratio_lp": ratio_lp,
        "c_from_quadrature": t.c_p * q.value,
    });
    Ok((v, c))
}

pub fn constants(cfg: &RunConfig) -> Outcome {
    let tol = cfg.tol("constants");
    per_p(cfg, |p| constants_one(p, cfg.grid_size, tol))
}

fn duality_one(cfg: &RunConfig, p: f64) -> Result<(Vec<DualityReport>, Value, Checks), String> {
    let gp = params(p)?;
    let reports: Vec<DualityReport> = STARTS
        .par_iter()
        .map(|&s| duality_report(&gp, cfg.grid_size, s).map_err(err))
        .collect::<Result<_, _>>()?;
    let mut c = Checks::default();
    for (r, s) in reports.iter().zip(STARTS) {
        let tag = |what: &str| format!("duality.p{p}.{s:?}.{what}");
        c.at_most(&tag("theorem_gap"), r.theorem_gap, cfg.tol("duality_gap"));
        c.at_most(&tag("primal_closed_form"), r.gap_primal, cfg.tol("closed_form"));
        c.at_most(&tag("dual_closed_form"), r.gap_dual, cfg.tol("closed_form"));
    }
    let spread = |f: fn(&DualityReport) -> f64| {
        let (lo, hi) = reports
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        (hi - lo) / hi.abs()
    };
    let (sp, sd) = (spread(|r| r.primal_inf_numeric), spread(|r| r.dual_sup_numeric));
    c.at_most(&format!("duality.p{p}.primal_start_spread"), sp, cfg.tol("start_spread"));
    c.at_most(&format!("duality.p{p}.dual_start_spread"), sd, cfg.tol("start_spread"));
    let starts: Vec<Value> = reports
        .iter()
        .zip(STARTS)
        .map(|(r, s)| json!({ "start": format!("{s:?}"), "report": r }))
        .collect();
    let v = json!({ "p": p, "starts": starts, "primal_spread": sp, "dual_spread": sd });
    Ok((reports, v, c))
}

pub fn duality(cfg: &RunConfig) -> Outcome {
    let out: Vec<_> = cfg.p.par_iter().map(|&p| duality_one(cfg, p)).collect();
    let mut csv = Csv::new(&[
        "p",
        "start",
        "primal_inf_numeric",
        "dual_sup_numeric",
        "closed_form",
        "c_p",
        "gap_primal",
        "gap_dual",
        "theorem_gap",
        "primal_iterations",
        "dual_iterations",
    ]);
    let mut runs = Vec::new();
    let mut checks = Checks::default();
    for r in out {
        let (reports, v, c) = r?;
        for (rep, s) in reports.iter().zip(STARTS) {
            let name = format!("{s:?}");
            csv.row(&[
                Cell::Num(rep.p),
                Cell::Text(&name),
                Cell::Num(rep.primal_inf_numeric),
                Cell::Num(rep.dual_sup_numeric),
                Cell::Num(rep.closed_form),
                Cell::Num(rep.c_p),
                Cell::Num(rep.gap_primal),
                Cell::Num(rep.gap_dual),
                Cell::Num(rep.theorem_gap),
                Cell::Int(rep.primal_iterations),
                Cell::Int(rep.dual_iterations),
            ]);
        }
        runs.push(v);
        checks.extend(c);
    }
    let file = write_csv(&csv, &cfg.output_dir, "duality.csv")?;
    Ok((json!({ "runs": runs, "csv": file }), checks))
}

/// (1 + c₁z + c₂z² + c₃ sin 3z) ∨ 0.3 with z the interval coordinate.
fn random_profile(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let c1 = rng.gen_range(-0.4..0.4);
    let c2 = rng.gen_range(-0.4..0.4);
    let c3 = rng.gen_range(-0.3..0.3);
    move |z: f64| (1.0 + c1 * z + c2 * z * z + c3 * (3.0 * z).sin()).max(0.3)
}

/// Initial datum for the ultraspherical flow. For p < 2 the grid lives on ℝ
/// and z = s/√(1+s²).
pub fn flow_initial(gp: &GNParams, grid: &Arc<WeightedGrid>, init: &str, seed: u64) -> Result<GridFunction, String> {
    let sub = !gp.is_super();
    let z = move |s: f64| if sub { s / (1.0 + s * s).sqrt() } else { s };
    let raw = match init {
        "legendre2" => GridFunction::from_fn(grid, |s| 1.0 + 0.2 * (3.0 * z(s) * z(s) - 1.0)),
        "constant" => GridFunction::from_fn(grid, |_| 1.0),
        "random" => {
            let h = random_profile(&mut ChaCha8Rng::seed_from_u64(seed ^ gp.p.to_bits()));
            GridFunction::from_fn(grid, |s| h(z(s)))
        }
        "manifold" => {
            if sub {
                return Err("manifold data exist for p > 2 only".into());
            }
            // (a, b) = (cosh s, sinh s) with s = (p−2)/2: max/min = e² for every p
            let s = 0.5 * (gp.p - 2.0);
            return Ok(manifold_profile(grid, gp, s.cosh(), s.sinh()));
        }
        other => return Err(format!("unknown flow datum {other:?}")),
    };
    normalize_initial(&raw, gp, Frame::UltraF).map_err(err)
}

/// Largest |lhs − rhs| / max(rel·|rhs|, abs) over the trace; ≤ 1 passes.
pub fn dissipation_excess(tr: &FlowTrace, rel: f64, abs: f64) -> f64 {
    tr.rows
        .iter()
        .map(|r| (r.dissipation_lhs - r.dissipation_rhs).abs() / (rel * r.dissipation_rhs.abs()).max(abs))
        .fold(0.0, f64::max)
}

fn flow_one(cfg: &RunConfig, p: f64) -> Outcome {
    let gp = params(p)?;
    let grid = Arc::new(WeightedGrid::ultraspherical(&gp, cfg.grid_size).map_err(err)?);
    let f0 = flow_initial(&gp, &grid, &cfg.init, cfg.seed)?;
    let fc = FlowConfig::new(gp, Frame::UltraF, grid, cfg.t_end).with_stride(cfg.stride);
    let tr = run_flow(&fc, &f0).map_err(err)?;
    let mut csv = Csv::new(&[
        "t",
        "lyapunov",
        "dissipation_lhs",
        "dissipation_rhs",
        "conserved_norm",
        "min_value",
        "clamp_events",
    ]);
    for r in &tr.rows {
        csv.row(&[
            Cell::Num(r.t),
            Cell::Num(r.lyapunov),
            Cell::Num(r.dissipation_lhs),
            Cell::Num(r.dissipation_rhs),
            Cell::Num(r.conserved_norm),
            Cell::Num(r.min_value),
            Cell::Int(r.clamp_events),
        ]);
    }
    let file = write_csv(&csv, &cfg.output_dir, &format!("flow_{}.csv", file_tag(p)))?;
    let mut c = Checks::default();
    let tag = |what: &str| format!("flow.p{p}.{what}");
    c.flag(&tag("completed"), tr.failure.is_none());
    let worst = tr.worst_increase();
    c.at_most(&tag("monotone"), worst, cfg.tol("monotone"));
    let drift = tr.norm_drift();
    c.at_most(&tag("norm_drift"), drift, cfg.tol("norm_drift"));
    let excess = dissipation_excess(&tr, cfg.tol("dissipation_rel"), cfg.tol("dissipation_abs"));
    c.at_most(&tag("dissipation_identity"), excess, 1.0);
    let f_end = tr.last().lyapunov;
    let fixed = matches!(cfg.init.as_str(), "constant" | "manifold");
    let max_abs = tr.rows.iter().map(|r| r.lyapunov.abs()).fold(0.0, f64::max);
    if fixed {
        c.at_most(&tag("fixed_point"), max_abs, cfg.tol("fixed_point"));
    } else if tr.last().t >= 10.0 {
        c.at_most(&tag("final_deficit"), f_end.abs(), cfg.tol("final_deficit"));
    }
    let v = json!({
        "p": p,
        "init": cfg.init,
        "csv": file,
        "rows": tr.rows.len(),
        "accepted": tr.accepted,
        "rejected": tr.rejected,
        "failure": tr.failure.as_ref().map(|e| e.to_string()),
        "lyapunov_initial": tr.rows[0].lyapunov,
        "lyapunov_final": f_end,
        "max_abs_lyapunov": max_abs,
        "worst_increase": worst,
        "norm_drift": drift,
        "dissipation_excess": excess,
    });
    Ok((v, c))
}

pub fn flow(cfg: &RunConfig) -> Outcome {
    per_p(cfg, |p| flow_one(cfg, p))
}

fn fastdiff_one(cfg: &RunConfig, p: f64) -> Outcome {
    let gp = params(p)?;
    let m = gp.m_fd;
    let grid = Arc::new(WeightedGrid::lebesgue_tan(f64::INFINITY, 2.0, cfg.grid_size).map_err(err)?);
    let b = Optimizer::barenblatt_fd(m, 1.0).map_err(err)?;
    let shape = match cfg.init.as_str() {
        "barenblatt" => b,
        _ => b.scaled(1.0, 1.0, 0.5),
    };
    let init = eval_optimizer(&shape, &grid).map_err(err)?;
    let fc = FdConfig::new(m, FdMode::SelfSimilar, grid, init.integrate(), cfg.t_end).with_stride(cfg.stride);
    let tr = run_fd(&fc, &init).map_err(err)?;
    let mut csv = Csv::new(&["t", "f1", "f1_optimum", "mass", "second_moment", "l1_distance", "sigma"]);
    for r in &tr.rows {
        csv.row(&[
            Cell::Num(r.t),
            Cell::Num(r.f1),
            Cell::Num(r.f1_optimum),
            Cell::Num(r.mass),
            Cell::Num(r.second_moment),
            Cell::Num(r.l1_distance),
            Cell::Num(r.sigma),
        ]);
    }
    let file = write_csv(&csv, &cfg.output_dir, &format!("fastdiff_{}.csv", file_tag(p)))?;
    let mut c = Checks::default();
    let tag = |what: &str| format!("fastdiff.p{p}.{what}");
    c.flag(&tag("completed"), tr.failure.is_none());
    let drift = tr.column_drift();
    let last = *tr.rows.last().expect("trace has the initial row");
    let worst_increase = tr
        .steps
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (1.0 + w[0].1.abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = tr.rows.iter().map(|r| r.f1_optimum - r.f1).fold(f64::NEG_INFINITY, f64::max);
    if cfg.init == "barenblatt" {
        for (name, d) in ["f1", "mass", "second_moment", "l1_distance"].iter().zip(drift) {
            c.at_most(&tag(&format!("stationary_{name}")), d, cfg.tol("stationary"));
        }
    } else {
        c.at_most(&tag("monotone"), worst_increase, cfg.tol("monotone"));
        c.at_most(&tag("mass_drift"), drift[1], cfg.tol("mass_drift"));
        if last.t >= 10.0 {
            c.at_most(&tag("l1_distance"), last.l1_distance, cfg.tol("l1_distance"));
        }
    }
    c.at_most(&tag("scaling_optimum"), slack, cfg.tol("f1_slack"));
    let v = json!({
        "p": p,
        "m": m,
        "init": cfg.init,
        "csv": file,
        "rows": tr.rows.len(),
        "failure": tr.failure.as_ref().map(|e| e.to_string()),
        "column_drift": { "f1": drift[0], "mass": drift[1], "second_moment": drift[2], "l1_distance": drift[3] },
        "final": last,
        "worst_increase": worst_increase,
        "optimum_slack": slack,
    });
    Ok((v, c))
}

pub fn fastdiff(cfg: &RunConfig) -> Outcome {
    per_p(cfg, |p| fastdiff_one(cfg, p))
}

fn gradflow_one(cfg: &RunConfig, p: f64) -> Outcome {
    if !(p > 1.0 && p < 2.0) {
        return Err(format!("gradflow needs 1 < p < 2 (q = 2/p), got p = {p}"));
    }
    let q = 2.0 / p;
    let grid = Arc::new(WeightedGrid::uniform(-40.0, 40.0, cfg.grid_size).map_err(err)?);
    let r0 = eval_optimizer(&Optimizer::gaussian(1.0, 1.0), &grid).map_err(err)?;
    let tr = heat_entropy_production(&r0, q, cfg.t_end, cfg.stride).map_err(err)?;
    let mut csv = Csv::new(&["t", "entropy", "production", "bound"]);
    for r in &tr.rows {
        csv.row(&[Cell::Num(r.t), Cell::Num(r.entropy), Cell::Num(r.production_rhs), Cell::Num(r.gns_bound)]);
    }
    let file = write_csv(&csv, &cfg.output_dir, &format!("gradflow_{}.csv", file_tag(p)))?;
    let mass = tr.rows[0].mass;
    let (mut entropy_err, mut identity_err, mut bound_slack) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for r in &tr.rows {
        let exact = gaussian_entropy(q, mass, 1.0 + 2.0 * r.t);
        entropy_err = entropy_err.max((r.entropy / exact - 1.0).abs());
        identity_err = identity_err.max(((r.production_lhs - r.production_rhs) / r.production_rhs).abs());
        bound_slack = bound_slack.max(r.gns_bound - r.production_lhs);
    }
    let mut c = Checks::default();
    let tag = |what: &str| format!("gradflow.p{p}.{what}");
    c.flag(&tag("completed"), tr.failure.is_none());
    c.at_most(&tag("entropy_trajectory"), entropy_err, cfg.tol("entropy"));
    c.at_most(&tag("production_identity"), identity_err, cfg.tol("production"));
    c.at_most(&tag("gns_bound"), bound_slack, cfg.tol("gns_bound"));
    let v = json!({
        "p": p,
        "q": q,
        "csv": file,
        "rows": tr.rows.len(),
        "failure": tr.failure.as_ref().map(|e| e.to_string()),
        "entropy_error": entropy_err,
        "production_identity_error": identity_err,
        "bound_slack": bound_slack,
    });
    Ok((v, c))
}

pub fn gradflow(cfg: &RunConfig) -> Outcome {
    per_p(cfg, |p| gradflow_one(cfg, p))
}

/// The interval specialization (a, b) = (1, d/2 − 1) with d = 2p/(p−2) for
/// p > 2, and the line specialization (1, −2/(2−p)) for p < 2.
pub fn identity_spec(gp: &GNParams, n: usize) -> Result<AbOperatorSpec, String> {
    let p = gp.p;
    match gp.d {
        Some(d) => AbOperatorSpec::on_interval(1.0, d / 2.0 - 1.0, NuKind::OneMinusZ2, -0.95, 0.95, n),
        None => AbOperatorSpec::on_interval(1.0, -2.0 / (2.0 - p), NuKind::OnePlusY2, -4.0, 4.0, n),
    }
    .map_err(err)
}

pub const IDENTITY_SAMPLES: usize = 20;

/// Relative mismatch at which differentiating c + taper·g (c ≈ 8) is
/// dominated by rounding; the mismatch grows again under refinement past
/// about 800 nodes. The convergence order is measured on the two coarser
/// grids and only above this floor.
pub const IDENTITY_FLOOR: f64 = 1e-9;

fn identities_one(cfg: &RunConfig, p: f64) -> Outcome {
    let gp = params(p)?;
    let n = cfg.grid_size;
    let levels = [(n - 1) / 4 + 1, (n - 1) / 2 + 1, n];
    let specs: Vec<AbOperatorSpec> = levels.iter().map(|&k| identity_spec(&gp, k)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states: Vec<u64> = (0..IDENTITY_SAMPLES).map(|_| rng.gen()).collect();
    let mut c = Checks::default();
    let mut samples = Vec::new();
    let (tol, ratio) = (cfg.tol("identity"), cfg.tol("refinement_ratio"));
    for (k, &state) in states.iter().enumerate() {
        let mut m1 = Vec::new();
        let mut m2 = Vec::new();
        for spec in &specs {
            let u = random_tapered(spec, &mut ChaCha8Rng::seed_from_u64(state));
            m1.push(verify_identity_1(&u, spec).map_err(err)?.mismatch);
            m2.push(verify_identity_2(&u, spec).map_err(err)?.mismatch);
        }
        let tag = |what: &str| format!("identities.p{p}.sample{k}.{what}");
        c.at_most(&tag("first"), m1[2], tol);
        c.at_most(&tag("second"), m2[2], tol);
        for (name, m) in [("first_refinement", &m1), ("second_refinement", &m2)] {
            if m[0] > IDENTITY_FLOOR {
                c.at_least(&tag(name), m[0] / m[1], ratio);
            }
        }
        samples.push(json!({ "first_mismatch": m1, "second_mismatch": m2 }));
    }
    let s = &specs[2];
    let v = json!({ "p": p, "a": s.a, "b": s.b, "nu": format!("{:?}", s.nu), "grids": levels, "samples": samples });
    Ok((v, c))
}

pub fn identities(cfg: &RunConfig) -> Outcome {
    per_p(cfg, |p| identities_one(cfg, p))
}

pub fn scan_class(r: &ScanRow) -> &'static str {
    if r.nonconstant > 0 {
        "nonconstant"
    } else if r.diverged > 0 {
        "diverged"
    } else {
        "constant"
    }
}

pub const RIGIDITY_STARTS: usize = 6;

fn rigidity_one(cfg: &RunConfig, p: f64) -> Outcome {
    let gp = params(p)?;
    let threshold = gp.threshold();
    let rows = lambda_scan(&gp, cfg.grid_size, threshold / 20.0, RIGIDITY_STARTS, cfg.seed).map_err(err)?;
    let mut csv = Csv::new(&["lambda", "classification", "max_deviation"]);
    let mut c = Checks::default();
    for r in &rows {
        csv.row(&[Cell::Num(r.lambda), Cell::Text(scan_class(r)), Cell::Num(r.max_deviation)]);
        // below the threshold a nonconstant solution that also satisfies the
        // rigidity identity would be a resolved counterexample
        if let (true, Some(res)) = (r.lambda < threshold * (1.0 - 1e-9), r.min_identity_residual) {
            c.at_least(&format!("rigidity.p{p}.lambda{}.identity_residual", r.lambda), res, cfg.tol("rigidity_sum"));
        }
    }
    let file = write_csv(&csv, &cfg.output_dir, &format!("rigidity_{}.csv", file_tag(p)))?;
    let v = json!({ "p": p, "threshold": threshold, "starts": RIGIDITY_STARTS, "csv": file, "scan": rows });
    Ok((v, c))
}

pub fn rigidity(cfg: &RunConfig) -> Outcome {
    per_p(cfg, |p| rigidity_one(cfg, p))
}

pub const LOGSOB_STEP: f64 = 1e-3;

pub fn report(cfg: &RunConfig) -> Outcome {
    let mut checks = Checks::default();
    let all = [2.5, 3.0, 4.0, 5.0, 1.2, 1.5, 1.8];
    let tol = cfg.tol("constants");
    let consts: Vec<_> = all.par_iter().map(|&p| constants_one(p, cfg.grid_size, tol)).collect();
    let mut constants = Vec::new();
    for r in consts {
        let (v, c) = r?;
        constants.push(v);
        checks.extend(c);
    }

    let (above, below) = log_sobolev_fd_estimates(LOGSOB_STEP).map_err(err)?;
    let slope = log_sobolev_limits().slope;
    checks.abs("logsob.slope_from_above", slope, above, cfg.tol("logsob_slope"));
    let ls = logsob_limit_check().map_err(err)?;
    checks.abs("logsob.gaussian_sup_bracket", 0.0, ls.gaussian_sup, cfg.tol("logsob_bracket"));
    checks.abs("logsob.gaussian_inf_bracket", 0.0, ls.gaussian_inf, cfg.tol("logsob_bracket"));

    let mut convexity = Vec::new();
    for alpha in [0.0, 0.5, 1.0, -0.5, 1.5] {
        let probe = convexity_probe(alpha, 20000, cfg.seed);
        let expect_convex = (0.0..=1.0).contains(&alpha);
        checks.flag(&format!("convexity.alpha{alpha}"), probe.passed == expect_convex && (expect_convex || probe.witness.is_some()));
        convexity.push(probe);
    }

    let (dual, c) = duality(cfg)?;
    checks.extend(c);
    let v = json!({
        "constants": constants,
        "log_sobolev": {
            "step": LOGSOB_STEP,
            "slope_exact": slope,
            "slope_from_above": above,
            "slope_from_below": below,
            "brackets": ls,
        },
        "convexity": convexity,
        "duality": dual,
    });
    Ok((v, checks))
}
