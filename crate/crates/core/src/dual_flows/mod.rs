//! Flows on the dual side: self-similar fast diffusion (free or with the
//! second moment frozen), entropy production along the heat flow, and
//! ∂ₜρ = Δρ^{2−p/2}.

use std::sync::Arc;

use serde::Serialize;

use crate::closed_forms::Optimizer;
use crate::constants::{constants_for, GNParams};
use crate::error::{Error, Result};
use crate::functionals::{entropy_f1, f1_scaling_optimum};
use crate::grid::{fornberg_weights, solve_tridiagonal, GridFunction, Integrator, Measure, StepControl, WeightedGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FdMode {
    /// ∂ₜG = ∂²G^m + ∂(yG)
    SelfSimilar,
    /// ∂ₜG = σ(t)∂²G^m + ∂(yG) with σ(t) freezing ∫G|y|²
    SigmaConstrained,
}

#[derive(Debug, Clone)]
pub struct FdConfig {
    pub m: f64,
    pub mode: FdMode,
    pub grid: Arc<WeightedGrid>,
    pub mass: f64,
    pub t_end: f64,
    pub output_stride: f64,
    pub control: StepControl,
}

impl FdConfig {
    pub fn new(m: f64, mode: FdMode, grid: Arc<WeightedGrid>, mass: f64, t_end: f64) -> Self {
        FdConfig {
            m,
            mode,
            grid,
            mass,
            t_end,
            output_stride: (t_end / 100.0).min(0.1),
            control: dual_control(),
        }
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.output_stride = stride;
        self
    }
}

fn dual_control() -> StepControl {
    StepControl {
        atol: 1e-12,
        rtol: 1e-10,
        dt_min: 1e-13,
        dt_max: f64::INFINITY,
        floor: 1e-300,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdRow {
    pub t: f64,
    pub f1: f64,
    pub f1_optimum: f64,
    pub mass: f64,
    pub second_moment: f64,
    pub l1_distance: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdTrace {
    pub rows: Vec<FdRow>,
    /// F₁ at every accepted step.
    pub steps: Vec<(f64, f64)>,
    #[serde(skip)]
    pub final_state: Option<GridFunction>,
    #[serde(serialize_with = "ser_failure")]
    pub failure: Option<Error>,
}

fn ser_failure<S: serde::Serializer>(e: &Option<Error>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

impl FdTrace {
    /// Largest relative change of each column (f1, mass, second moment,
    /// L¹ distance) against its initial value.
    pub fn column_drift(&self) -> [f64; 4] {
        let r0 = self.rows[0];
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let mut d = [0.0f64; 4];
        for r in &self.rows {
            d[0] = d[0].max(rel(r.f1, r0.f1));
            d[1] = d[1].max(rel(r.mass, r0.mass));
            d[2] = d[2].max(rel(r.second_moment, r0.second_moment));
            d[3] = d[3].max((r.l1_distance - r0.l1_distance).abs());
        }
        d
    }
}

fn require_lebesgue(grid: &WeightedGrid, what: &str) -> Result<()> {
    match grid.measure() {
        Measure::Lebesgue { .. } => Ok(()),
        m => Err(Error::DomainMismatch(format!("{what} needs a dx grid, got {m:?}"))),
    }
}

fn pow_floor(g: f64, e: f64) -> f64 {
    (e * g.max(1e-300).ln()).exp()
}

/// Interface fluxes of the two parts of the fast-diffusion flux
/// −G ∂_y(σ m/(m−1) G^{m−1} + y²/2), split as σ·diffusive + drift.
fn fd_fluxes(y: &[f64], g: &[f64], m: f64, fd: &mut [f64], fy: &mut [f64]) {
    let c = m / (m - 1.0);
    for i in 0..y.len() - 1 {
        let dy = y[i + 1] - y[i];
        let gbar = 0.5 * (g[i] + g[i + 1]);
        fd[i] = -gbar * c * (pow_floor(g[i + 1], m - 1.0) - pow_floor(g[i], m - 1.0)) / dy;
        fy[i] = -gbar * 0.5 * (y[i + 1] * y[i + 1] - y[i] * y[i]) / dy;
    }
}

/// σ making the discrete second moment stationary: −Σ F_y Δ(y²) / Σ F_D Δ(y²).
fn discrete_sigma(y: &[f64], fd: &[f64], fy: &[f64]) -> Result<f64> {
    let (mut p, mut q) = (0.0, 0.0);
    for i in 0..fd.len() {
        let d2 = y[i + 1] * y[i + 1] - y[i] * y[i];
        p += fd[i] * d2;
        q += fy[i] * d2;
    }
    if p == 0.0 {
        return Err(Error::DivisionByZero("sigma"));
    }
    Ok(-q / p)
}

/// σ = ∫G|y|² / ∫G^m, the value freezing the second moment of the continuous
/// equation (integrate ∂²G^m and ∂(yG) against y² by parts).
pub fn sigma_of(g: &GridFunction, m: f64) -> Result<f64> {
    if g.values.iter().any(|&v| v < 0.0) {
        return Err(Error::domain("sigma_of", "G must be non-negative"));
    }
    if g.values.iter().all(|&v| v == 0.0) {
        return Err(Error::DivisionByZero("sigma_of"));
    }
    let a = g.grid.integrate_values(&g.values.iter().map(|&v| pow_floor(v, m)).collect::<Vec<_>>());
    let b = second_moment(g);
    if !(a > 0.0) {
        return Err(Error::DivisionByZero("sigma_of"));
    }
    Ok(b / a)
}

pub fn second_moment(g: &GridFunction) -> f64 {
    g.grid
        .integrate_values(&g.values.iter().zip(g.nodes()).map(|(v, y)| v * y * y).collect::<Vec<_>>())
}

/// Right-hand side of the finite-volume scheme for the chosen mode.
/// Returns the σ used.
pub fn fd_rhs_into(grid: &WeightedGrid, m: f64, mode: FdMode, g: &[f64], out: &mut [f64]) -> Result<f64> {
    fd_rhs_impl(grid, m, mode, None, g, out)
}

/// Right-hand side with a prescribed diffusion coefficient σ.
pub fn fd_rhs_with_sigma(grid: &WeightedGrid, m: f64, sigma: f64, g: &[f64], out: &mut [f64]) -> Result<()> {
    fd_rhs_impl(grid, m, FdMode::SigmaConstrained, Some(sigma), g, out).map(|_| ())
}

fn fd_rhs_impl(grid: &WeightedGrid, m: f64, mode: FdMode, fixed: Option<f64>, g: &[f64], out: &mut [f64]) -> Result<f64> {
    let y = grid.nodes();
    let n = y.len();
    let mut fd = vec![0.0; n - 1];
    let mut fy = vec![0.0; n - 1];
    fd_fluxes(y, g, m, &mut fd, &mut fy);
    let sigma = match (mode, fixed) {
        (_, Some(s)) => s,
        (FdMode::SelfSimilar, None) => 1.0,
        (FdMode::SigmaConstrained, None) => discrete_sigma(y, &fd, &fy)?,
    };
    let w = grid.weights();
    for i in 0..n {
        let right = if i + 1 < n { sigma * fd[i] + fy[i] } else { 0.0 };
        let left = if i > 0 { sigma * fd[i - 1] + fy[i - 1] } else { 0.0 };
        out[i] = -(right - left) / w[i];
    }
    Ok(sigma)
}

/// Self-similar fast diffusion from `initial`. Zero flux through the two
/// outer interfaces; on a tan grid these sit at ±∞.
pub fn run_fd(cfg: &FdConfig, initial: &GridFunction) -> Result<FdTrace> {
    let m = cfg.m;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParams(format!("m = {m} must lie in (0, 1)")));
    }
    if cfg.mode == FdMode::SigmaConstrained && !(m > 0.5) {
        return Err(Error::InvalidParams(format!(
            "the second-moment constrained flow needs m in (1/2, 1), got {m}"
        )));
    }
    require_lebesgue(&cfg.grid, "fast diffusion")?;
    if initial.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("run_fd", "initial density must be positive"));
    }
    let mass0 = initial.integrate();
    if ((mass0 - cfg.mass) / cfg.mass).abs() > 1e-6 {
        return Err(Error::InvalidParams(format!("initial mass {mass0} differs from M = {}", cfg.mass)));
    }
    if !(cfg.t_end > 0.0 && cfg.output_stride > 0.0) {
        return Err(Error::InvalidParams("t_end and stride must be positive".into()));
    }
    let grid = cfg.grid.clone();
    // no finite-moment Barenblatt profile for m ≤ 1/3
    let limit = Optimizer::barenblatt_fd(m, cfg.mass).ok().map(|o| eval_on(&grid, &o));
    let row = |t: f64, v: &[f64]| -> Result<FdRow> {
        let gf = GridFunction {
            grid: grid.clone(),
            values: v.to_vec(),
            strictly_positive: true,
        };
        let mut scratch = vec![0.0; v.len()];
        let sigma = fd_rhs_into(&grid, m, cfg.mode, v, &mut scratch)?;
        let l1 = limit.as_ref().map_or(f64::NAN, |lim| {
            grid.integrate_values(&v.iter().zip(lim).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
        });
        Ok(FdRow {
            t,
            f1: entropy_f1(&gf, m)?.value,
            f1_optimum: f1_scaling_optimum(&gf, m)?.0,
            mass: gf.integrate(),
            second_moment: second_moment(&gf),
            l1_distance: l1,
            sigma,
        })
    };
    let f1_of = |v: &[f64]| -> Result<f64> {
        let gf = GridFunction {
            grid: grid.clone(),
            values: v.to_vec(),
            strictly_positive: true,
        };
        Ok(entropy_f1(&gf, m)?.value)
    };
    let mut y = initial.values.clone();
    let mut rows = vec![row(0.0, &y)?];
    let mut steps = vec![(0.0, rows[0].f1)];
    let mut it = Integrator::new(y.len(), cfg.control, 1e-5, true);
    let mut rhs = |_t: f64, v: &[f64], out: &mut [f64]| -> Result<()> {
        if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::StepFailure {
                t: f64::NAN,
                dt: f64::NAN,
                reason: format!("density lost positivity at node {i}"),
            });
        }
        fd_rhs_into(&grid, m, cfg.mode, v, out).map(|_| ())
    };
    let mut t = 0.0;
    let mut failure = None;
    let n_out = (cfg.t_end / cfg.output_stride - 1e-9).ceil().max(1.0) as usize;
    for j in 1..=n_out {
        let target = (j as f64 * cfg.output_stride).min(cfg.t_end);
        let mut on_step = |s: f64, v: &[f64]| -> Result<()> {
            steps.push((s, f1_of(v)?));
            Ok(())
        };
        if let Err(e) = it.advance_to(&mut t, &mut y, target, &mut rhs, &mut on_step) {
            failure = Some(e);
            break;
        }
        match row(t, &y) {
            Ok(r) => rows.push(r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(FdTrace {
        rows,
        steps,
        final_state: Some(GridFunction {
            grid: grid.clone(),
            strictly_positive: y.iter().all(|&v| v > 0.0),
            values: y,
        }),
        failure,
    })
}

fn eval_on(grid: &WeightedGrid, o: &Optimizer) -> Vec<f64> {
    grid.nodes().iter().map(|&x| o.eval_at(x)).collect()
}

/// −d/dt by a five-point Fornberg stencil over the trace times.
fn fd_rate(ts: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = ts.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    let width = n.min(5);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let w = fornberg_weights(ts[i], &ts[start..start + width], 1);
            -w[1].iter().zip(&vs[start..]).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatRow {
    pub t: f64,
    /// ∫ρ^q
    pub entropy: f64,
    /// −d/dt ∫ρ^q from the trace.
    pub production_lhs: f64,
    /// 4((q−1)/q) ∫|(ρ^{q/2})′|²
    pub production_rhs: f64,
    /// GNS lower bound on −d/dt ∫ρ^q.
    pub gns_bound: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatTrace {
    pub q: f64,
    pub rows: Vec<HeatRow>,
    #[serde(serialize_with = "ser_failure")]
    pub failure: Option<Error>,
}

/// ∫ρ^q for a Gaussian of the given mass and variance.
pub fn gaussian_entropy(q: f64, mass: f64, variance: f64) -> f64 {
    mass.powf(q) / q.sqrt() * (2.0 * std::f64::consts::PI * variance).powf(0.5 * (1.0 - q))
}

/// −d/dt ∫ρ^q ≥ 4((q−1)/q) K^{2/η} M^{−q(1−η)/η} (∫ρ^q)^{1/η}, from
/// ‖f‖₂ ≤ C‖f′‖^η‖f‖_p^{1−η} with f = ρ^{q/2}, p = 2/q, η = (2−p)/(2+p),
/// K = 1/C the sharp constant.
pub fn heat_gns_bound(q: f64, mass: f64, entropy: f64) -> Result<f64> {
    let gp = GNParams::new(2.0 / q)?;
    let c = constants_for(&gp)?.c_gn;
    let eta = gp.eta;
    Ok(4.0 * (q - 1.0) / q
        * ((-2.0 / eta) * c.ln() - q * (1.0 - eta) / eta * mass.ln() + entropy.ln() / eta).exp())
}

fn heat_production(grid: &WeightedGrid, q: f64, rho: &[f64]) -> Result<f64> {
    let f: Vec<f64> = rho.iter().map(|&r| pow_floor(r, 0.5 * q)).collect();
    let d = grid.diff(&f, 1)?;
    Ok(4.0 * (q - 1.0) / q * grid.integrate_values(&d.iter().map(|x| x * x).collect::<Vec<_>>()))
}

/// Heat flow ρₜ = ρ″ by fourth-order collocation; the two outermost nodes at
/// each end are held fixed, so the datum must be negligible there.
pub fn heat_entropy_production(rho0: &GridFunction, q: f64, t_end: f64, stride: f64) -> Result<HeatTrace> {
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::InvalidParams(format!("q = {q} must lie in (1, 2)")));
    }
    require_lebesgue(&rho0.grid, "heat flow")?;
    if rho0.values.iter().any(|&v| v < 0.0) {
        return Err(Error::domain("heat_entropy_production", "ρ₀ must be non-negative"));
    }
    let grid = rho0.grid.clone();
    let n = grid.len();
    let mut rhs = |_t: f64, v: &[f64], out: &mut [f64]| -> Result<()> {
        let d2 = grid.diff(v, 2)?;
        out.copy_from_slice(&d2);
        for k in [0, 1, n - 2, n - 1] {
            out[k] = 0.0;
        }
        Ok(())
    };
    let entropy = |v: &[f64]| grid.integrate_values(&v.iter().map(|&r| pow_floor(r, q)).collect::<Vec<_>>());
    let mut y = rho0.values.clone();
    let mut t = 0.0;
    let mut raw = vec![(0.0, entropy(&y), heat_production(&grid, q, &y)?, grid.integrate_values(&y))];
    let ctl = StepControl {
        atol: 1e-13,
        rtol: 1e-11,
        ..StepControl::default()
    };
    let mut it = Integrator::new(n, ctl, 1e-5, false);
    let mut failure = None;
    let n_out = (t_end / stride - 1e-9).ceil().max(1.0) as usize;
    for j in 1..=n_out {
        let target = (j as f64 * stride).min(t_end);
        if let Err(e) = it.advance_to(&mut t, &mut y, target, &mut rhs, &mut |_, _| Ok(())) {
            failure = Some(e);
            break;
        }
        raw.push((t, entropy(&y), heat_production(&grid, q, &y)?, grid.integrate_values(&y)));
    }
    let ts: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let es: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let lhs = fd_rate(&ts, &es);
    let rows = raw
        .iter()
        .zip(lhs)
        .map(|(&(t, e, prod, mass), l)| {
            Ok(HeatRow {
                t,
                entropy: e,
                production_lhs: l,
                production_rhs: prod,
                gns_bound: heat_gns_bound(q, mass, e)?,
                mass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatTrace { q, rows, failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoRow {
    pub t: f64,
    /// ∫ρ^{p/2}
    pub functional: f64,
    /// −d/dt ∫ρ^{p/2} from the trace.
    pub dissipation_lhs: f64,
    /// (1/8) p(p−2)(4−p) ∫|ρ′|²/ρ
    pub dissipation_rhs: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoTrace {
    pub p: f64,
    pub rows: Vec<RhoRow>,
    pub notes: Vec<String>,
    #[serde(serialize_with = "ser_failure")]
    pub failure: Option<Error>,
}

/// ∂ₜρ = (ρ^{2−p/2})″ by conservative finite volumes with zero outer flux.
pub fn run_rho_flow(gp: &GNParams, rho0: &GridFunction, t_end: f64, stride: f64) -> Result<RhoTrace> {
    let p = gp.p;
    if !(p > 2.0 && p < 3.0) {
        return Err(Error::InvalidParams(format!(
            "p = {p}: the gradient-flow reading needs the action with α = 3 − p to be convex, i.e. 2 < p < 3"
        )));
    }
    require_lebesgue(&rho0.grid, "ρ flow")?;
    if rho0.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("run_rho_flow", "ρ₀ must be positive"));
    }
    let expo = 2.0 - 0.5 * p;
    let mut notes = Vec::new();
    // mass condition 2 − p/2 > 1 − 1/d, recorded for d = 1
    if expo <= 0.0 {
        notes.push(format!("exponent 2 − p/2 = {expo} violates the d = 1 mass condition"));
    }
    let grid = rho0.grid.clone();
    let coef = p * (p - 2.0) * (4.0 - p) / 8.0;
    let measure = |v: &[f64]| -> Result<(f64, f64, f64)> {
        let d = grid.diff(v, 1)?;
        let fisher = grid.integrate_values(&d.iter().zip(v).map(|(a, r)| a * a / r).collect::<Vec<_>>());
        let fun = grid.integrate_values(&v.iter().map(|&r| pow_floor(r, 0.5 * p)).collect::<Vec<_>>());
        Ok((fun, coef * fisher, grid.integrate_values(v)))
    };
    let mut raw = Vec::new();
    let mut failure = None;
    let mut solver = PorousBdf2::new(&grid, expo, rho0.values.clone());
    let m0 = measure(&solver.y)?;
    raw.push((0.0, m0.0, m0.1, m0.2));
    let n_out = (t_end / stride - 1e-9).ceil().max(1.0) as usize;
    for j in 1..=n_out {
        let target = (j as f64 * stride).min(t_end);
        if let Err(e) = solver.advance_to(target, stride / 8.0) {
            failure = Some(e);
            break;
        }
        let m = measure(&solver.y)?;
        raw.push((solver.t, m.0, m.1, m.2));
    }
    let ts: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let fs: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let lhs = fd_rate(&ts, &fs);
    let rows = raw
        .iter()
        .zip(lhs)
        .map(|(&(t, f, d, mass), l)| RhoRow {
            t,
            functional: f,
            dissipation_lhs: l,
            dissipation_rhs: d,
            mass,
        })
        .collect();
    Ok(RhoTrace {
        p,
        rows,
        notes,
        failure,
    })
}

/// Variable-step BDF2 for the finite-volume form of ρₜ = (ρ^n)″ with zero
/// outer flux. The diffusivity nρ^{n−1} blows up in thin tails when n < 1,
/// which rules out explicit steps.
struct PorousBdf2 {
    ys: Vec<f64>,
    w: Vec<f64>,
    n: f64,
    t: f64,
    y: Vec<f64>,
    prev: Option<(Vec<f64>, f64)>,
    h: f64,
}

impl PorousBdf2 {
    fn new(grid: &WeightedGrid, n: f64, y: Vec<f64>) -> Self {
        PorousBdf2 {
            ys: grid.nodes().to_vec(),
            w: grid.weights().to_vec(),
            n,
            t: 0.0,
            y,
            prev: None,
            h: 1e-8,
        }
    }

    /// R(ρ) and the three diagonals of ∂R.
    fn residual(&self, v: &[f64], r: &mut [f64], lo: &mut [f64], di: &mut [f64], up: &mut [f64]) {
        let k = v.len();
        r.iter_mut().for_each(|x| *x = 0.0);
        di.iter_mut().for_each(|x| *x = 0.0);
        lo.iter_mut().for_each(|x| *x = 0.0);
        up.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k - 1 {
            let dy = self.ys[i + 1] - self.ys[i];
            let flux = -(pow_floor(v[i + 1], self.n) - pow_floor(v[i], self.n)) / dy;
            let a = self.n * pow_floor(v[i], self.n - 1.0) / dy;
            let b = -self.n * pow_floor(v[i + 1], self.n - 1.0) / dy;
            // flux leaves cell i and enters cell i+1
            r[i] -= flux / self.w[i];
            r[i + 1] += flux / self.w[i + 1];
            di[i] -= a / self.w[i];
            up[i] -= b / self.w[i];
            lo[i + 1] += a / self.w[i + 1];
            di[i + 1] += b / self.w[i + 1];
        }
    }

    /// Solves y − c·h·R(y) = rhs by damped Newton.
    fn implicit(&self, rhs: &[f64], ch: f64, guess: &[f64]) -> Result<Vec<f64>> {
        let k = rhs.len();
        let mut y = guess.to_vec();
        let (mut r, mut lo, mut di, mut up) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for _ in 0..50 {
            self.residual(&y, &mut r, &mut lo, &mut di, &mut up);
            let g: Vec<f64> = (0..k).map(|i| y[i] - ch * r[i] - rhs[i]).collect();
            let a: Vec<f64> = lo.iter().map(|x| -ch * x).collect();
            let b: Vec<f64> = di.iter().map(|x| 1.0 - ch * x).collect();
            let c: Vec<f64> = up.iter().map(|x| -ch * x).collect();
            let dx = solve_tridiagonal(&a, &b, &c, &g);
            let mut step = 1.0;
            loop {
                if y.iter().zip(&dx).all(|(a, d)| a - step * d > 0.0) {
                    break;
                }
                step *= 0.5;
                if step < 1e-6 {
                    return Err(Error::StepFailure {
                        t: self.t,
                        dt: ch,
                        reason: "Newton iterate lost positivity".into(),
                    });
                }
            }
            let mut rel: f64 = 0.0;
            for i in 0..k {
                y[i] -= step * dx[i];
                rel = rel.max((step * dx[i]).abs() / y[i]);
            }
            if step == 1.0 && rel < 1e-12 {
                return Ok(y);
            }
        }
        Err(Error::StepFailure {
            t: self.t,
            dt: ch,
            reason: "Newton did not converge".into(),
        })
    }

    fn advance_to(&mut self, target: f64, h_max: f64) -> Result<()> {
        while self.t < target - 1e-14 * target.max(1.0) {
            let mut h = (self.h * 1.3).min(h_max);
            let rest = target - self.t;
            if h >= rest {
                h = rest;
            } else if h > 0.5 * rest {
                h = 0.5 * rest;
            }
            let next = match &self.prev {
                None => self.implicit(&self.y.clone(), h, &self.y)?,
                Some((old, h_old)) => {
                    let om = h / h_old;
                    let a = (1.0 + om) * (1.0 + om) / (1.0 + 2.0 * om);
                    let b = om * om / (1.0 + 2.0 * om);
                    let rhs: Vec<f64> = self.y.iter().zip(old).map(|(y, o)| a * y - b * o).collect();
                    let guess: Vec<f64> = self.y.iter().zip(old).map(|(y, o)| y + om * (y - o)).map(|g| g.max(1e-300)).collect();
                    let guess = if guess.iter().all(|g| *g > 0.0) { guess } else { self.y.clone() };
                    self.implicit(&rhs, h * (1.0 + om) / (1.0 + 2.0 * om), &guess)?
                }
            };
            let old = std::mem::replace(&mut self.y, next);
            self.prev = Some((old, h));
            self.t += h;
            self.h = h;
        }
        Ok(())
    }
}
