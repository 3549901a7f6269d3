//! Primal and dual problems of the duality theorem, the transport chain that
//! proves the inequality between them, and the logarithmic Sobolev limit.

pub mod logsob;
pub mod solvers;
pub mod transport;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::Optimizer;
use crate::constants::GNParams;
use crate::error::Result;
use crate::grid::{GridFunction, WeightedGrid};

pub use logsob::{logsob_grid, logsob_inf_bracket, logsob_limit_check, logsob_sech_closed_form, logsob_sup_bracket, LogSobReport, LogSobSample};
pub use solvers::{
    closed_form_pair, dual_family_value, fit_dual, fit_primal, fit_symmetries, parametric_dual, solve_dual, solve_primal,
    ParametricDual, Solution, SymmetryFit, MAX_ITERATIONS,
};
pub use transport::{
    build_transport, chain_exponents, verify_chain, verify_plan_chain, ChainReport, ChainStep, ChainStepName,
    PushforwardCheck, StepKind, TransportPlan,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub p: f64,
    pub primal_inf_numeric: f64,
    pub dual_sup_numeric: f64,
    /// C₁(p) or C₂(p)
    pub closed_form: f64,
    pub c_p: f64,
    /// |c_p·primal − closed_form| / closed_form
    pub gap_primal: f64,
    /// |dual − closed_form| / closed_form
    pub gap_dual: f64,
    /// |dual − c_p·primal| / dual
    pub theorem_gap: f64,
    pub primal_fit: SymmetryFit,
    pub dual_fit: SymmetryFit,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
    pub primal_converged: bool,
    pub dual_converged: bool,
}

/// Uniform working grid for the primal problem, wide enough for the
/// optimizer tails at unit scale.
pub fn primal_grid(gp: &GNParams, n: usize) -> Result<Arc<WeightedGrid>> {
    let half = if gp.is_super() { 12.0 + 8.0 * (gp.p - 2.0) } else { 6.0 };
    Ok(Arc::new(WeightedGrid::uniform(-half, half, n)?))
}

/// Heavy-tail working grid for the dual problem.
pub fn dual_grid(n: usize) -> Result<Arc<WeightedGrid>> {
    Ok(Arc::new(WeightedGrid::lebesgue_tan(f64::INFINITY, 1.0, n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StartKind {
    Gaussian,
    WideBump,
    Skewed,
}

pub const STARTS: [StartKind; 3] = [StartKind::Gaussian, StartKind::WideBump, StartKind::Skewed];

/// Non-optimal starting points shared by both solvers.
pub fn start_function(kind: StartKind, grid: &Arc<WeightedGrid>) -> GridFunction {
    match kind {
        StartKind::Gaussian => GridFunction::from_fn(grid, |x| (-0.5 * x * x).exp()),
        StartKind::WideBump => GridFunction::from_fn(grid, |x| (-(x / 2.0).powi(8)).exp()),
        StartKind::Skewed => GridFunction::from_fn(grid, |x| (-0.3 * (x - 0.5).powi(2)).exp() * (1.0 + 0.4 * (x / (1.0 + x * x)))),
    }
}

/// Runs both solvers from one start and compares them with the closed forms.
pub fn duality_report(gp: &GNParams, n: usize, start: StartKind) -> Result<DualityReport> {
    let pg = primal_grid(gp, n)?;
    let dg = dual_grid(4 * n)?;
    let primal = solve_primal(gp, &start_function(start, &pg))?;
    let dual = solve_dual(gp, &start_function(start, &dg))?;
    let (closed, c_p) = closed_form_pair(gp)?;
    Ok(DualityReport {
        p: gp.p,
        primal_inf_numeric: primal.value,
        dual_sup_numeric: dual.value,
        closed_form: closed,
        c_p,
        gap_primal: (c_p * primal.value - closed).abs() / closed,
        gap_dual: (dual.value - closed).abs() / closed,
        theorem_gap: (dual.value - c_p * primal.value).abs() / dual.value,
        primal_fit: fit_primal(&primal.function, gp),
        dual_fit: fit_dual(&dual.function, gp),
        primal_iterations: primal.iterations,
        dual_iterations: dual.iterations,
        primal_converged: primal.converged,
        dual_converged: dual.converged,
    })
}

/// Reports for several exponents, computed in parallel; order follows `ps`.
pub fn duality_sweep(ps: &[f64], n: usize, start: StartKind) -> Result<Vec<DualityReport>> {
    ps.par_iter().map(|&p| duality_report(&GNParams::new(p)?, n, start)).collect()
}

/// The closed-form optimizer pair normalized to unit mass: F = f^r/∫f^r with
/// f = f⋆ and r = p for p > 2, f = f∗ and r = 2 for p < 2, and G = G⋆/∫G⋆.
pub fn optimizer_pair(gp: &GNParams, n_source: usize, n_target: usize) -> Result<(GridFunction, GridFunction)> {
    let (_, _, r) = chain_exponents(gp);
    let star = Optimizer::primal(gp);
    let src = if gp.is_super() {
        let e = r * gp.profile_exponent();
        let half = (46.0 + e * 2f64.ln()) / e;
        Arc::new(WeightedGrid::uniform(-half, half, n_source)?)
    } else {
        let h = std::f64::consts::FRAC_PI_2;
        Arc::new(WeightedGrid::uniform(-h, h, n_source)?)
    };
    let f = GridFunction::from_fn(&src, |x| star.eval_at(x).powf(r));
    let dual = Optimizer::dual(gp);
    let g = GridFunction::from_fn(&dual_grid(n_target)?, |y| dual.eval_at(y));
    let (fm, gm) = (f.integrate(), g.integrate());
    Ok((f.map(|v| v / fm), g.map(|v| v / gm)))
}
