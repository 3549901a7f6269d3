//! The nonlinear flows along which the GNS deficits decay: the f-form in
//! ultraspherical variables, the v-form on the line, the manifold ODE of
//! the optimizer family and the generalized u-flow.

mod generalized;

use std::sync::Arc;

use serde::Serialize;

use crate::constants::{GNParams, Regime};
use crate::error::{Error, Result};
use crate::functionals::{line_constant, ultra_weight};
use crate::grid::{fornberg_weights, GridFunction, Integrator, Measure, StepControl, WeightedGrid};

pub use generalized::{generalized_flow_u, u_dissipation, u_functional, u_norm, u_power_rate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Frame {
    /// f on (−1, 1) with dν_p, or on ℝ with dξ_p.
    UltraF,
    /// v on ℝ (p > 2) or on (−π/2, π/2) (p < 2) with dx.
    LineV,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub p: GNParams,
    pub frame: Frame,
    pub grid: Arc<WeightedGrid>,
    pub t_end: f64,
    /// Time between trace rows.
    pub output_stride: f64,
    /// Required value of the conserved norm at t = 0, checked to 1e−8.
    pub norm_target: Option<f64>,
    pub control: StepControl,
    pub dt0: f64,
}

impl FlowConfig {
    pub fn new(p: GNParams, frame: Frame, grid: Arc<WeightedGrid>, t_end: f64) -> Self {
        FlowConfig {
            p,
            frame,
            grid,
            t_end,
            output_stride: (t_end / 100.0).min(0.1),
            norm_target: None,
            control: StepControl {
                atol: 1e-11,
                rtol: 1e-11,
                dt_min: 1e-13,
                dt_max: f64::INFINITY,
                floor: 1e-14,
            },
            dt0: 1e-5,
        }
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn with_norm_target(mut self, target: f64) -> Self {
        self.norm_target = Some(target);
        self
    }

    /// ‖v⋆‖_p (resp. ‖v∗‖_p) on the line, 1 for the probability measures.
    pub fn theorem_norm(p: &GNParams, frame: Frame) -> Result<f64> {
        Ok(match frame {
            Frame::UltraF => 1.0,
            Frame::LineV => crate::constants_for(p)?.zeta_p.powf(1.0 / p.p),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub lyapunov: f64,
    /// −dF/dt from finite differences of the lyapunov column.
    pub dissipation_lhs: f64,
    /// Quadrature of the dissipation formula.
    pub dissipation_rhs: f64,
    pub conserved_norm: f64,
    pub min_value: f64,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    /// (t, F) at every accepted step.
    pub steps: Vec<(f64, f64)>,
    pub accepted: usize,
    pub rejected: usize,
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

impl FlowTrace {
    /// Largest increase of F between consecutive accepted steps, relative to
    /// 1 + |F|.
    pub fn worst_increase(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (1.0 + w[0].1.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest relative drift of the conserved norm from its initial value.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.rows[0].conserved_norm;
        self.rows
            .iter()
            .map(|r| ((r.conserved_norm - n0) / n0).abs())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least the initial row")
    }
}

fn positivity(v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::StepFailure {
            t: f64::NAN,
            dt: f64::NAN,
            reason: format!("non-positive value {} at node {i}", v[i]),
        });
    }
    Ok(())
}

fn check_ultra_grid(grid: &WeightedGrid, gp: &GNParams) -> Result<()> {
    match (grid.measure(), gp.regime) {
        (Measure::NuP { p }, Regime::Supercritical) | (Measure::XiP { p }, Regime::Subcritical) if p == gp.p => Ok(()),
        (m, _) => Err(Error::DomainMismatch(format!("ultraspherical flow at p = {} on {m:?}", gp.p))),
    }
}

fn check_line_grid(grid: &WeightedGrid, gp: &GNParams) -> Result<()> {
    match grid.measure() {
        Measure::Lebesgue { a, b } => {
            let half = std::f64::consts::FRAC_PI_2;
            if !gp.is_super() && (a < -half - 1e-12 || b > half + 1e-12) {
                return Err(Error::DomainMismatch("the p < 2 line flow lives on (−π/2, π/2)".into()));
            }
            Ok(())
        }
        m => Err(Error::DomainMismatch(format!("line flow needs dx, grid carries {m:?}"))),
    }
}

/// f^{1−p/2}[𝖫f + (p/2) w |f′|²/f] with 𝖫f = w f″ − (2p/|p−2|) x f′,
/// w = 1 − z² or 1 + y².
pub fn ultra_rhs_into(grid: &WeightedGrid, gp: &GNParams, f: &[f64], out: &mut [f64]) -> Result<()> {
    positivity(f)?;
    let d1 = grid.diff(f, 1)?;
    let d2 = grid.diff(f, 2)?;
    let p = gp.p;
    let k = gp.drift();
    for i in 0..f.len() {
        let x = grid.nodes()[i];
        let w = ultra_weight(gp, x);
        let l = w * d2[i] - k * x * d1[i];
        out[i] = f[i].powf(1.0 - 0.5 * p) * (l + 0.5 * p * w * d1[i] * d1[i] / f[i]);
    }
    Ok(())
}

pub fn rhs_ultra(f: &GridFunction, gp: &GNParams) -> Result<GridFunction> {
    check_ultra_grid(&f.grid, gp)?;
    let mut out = vec![0.0; f.values.len()];
    ultra_rhs_into(&f.grid, gp, &f.values, &mut out)?;
    Ok(f.with_values(out))
}

/// Geometric factor (1 − z²)^{−1/2} = cosh x, or (1 + y²)^{−1/2} = cos x.
fn line_factor(gp: &GNParams, x: f64) -> f64 {
    if gp.is_super() {
        x.cosh()
    } else {
        x.cos()
    }
}

/// tanh x or tan x.
fn line_coord(gp: &GNParams, x: f64) -> f64 {
    if gp.is_super() {
        x.tanh()
    } else {
        x.tan()
    }
}

/// v′ and v″ through v = v_ref·g with g = v/v_ref differentiated on the
/// grid and v_ref = (cosh x)^{−k} or (cos x)^{k} differentiated exactly.
/// The ratio g has finite limits at the ends of the line, v itself decays.
pub fn line_derivatives(grid: &WeightedGrid, gp: &GNParams, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let star = crate::closed_forms::Optimizer::primal(gp);
    let k = gp.profile_exponent();
    let refs: Vec<f64> = grid.nodes().iter().map(|&x| star.eval_at(x)).collect();
    let g: Vec<f64> = v.iter().zip(&refs).map(|(a, b)| a / b).collect();
    let g1 = grid.diff(&g, 1)?;
    let g2 = grid.diff(&g, 2)?;
    let mut d1 = vec![0.0; v.len()];
    let mut d2 = vec![0.0; v.len()];
    for i in 0..v.len() {
        let x = grid.nodes()[i];
        let t = line_coord(gp, x);
        // (v_ref)″/v_ref = k²t² − k s² with s² = 1 − t² or 1 + t²
        let s2 = ultra_weight(gp, t);
        d1[i] = refs[i] * (g1[i] - k * t * g[i]);
        d2[i] = refs[i] * (g2[i] - 2.0 * k * t * g1[i] + (k * k * t * t - k * s2) * g[i]);
    }
    Ok((d1, d2))
}

pub fn line_rhs_into(grid: &WeightedGrid, gp: &GNParams, v: &[f64], out: &mut [f64]) -> Result<()> {
    positivity(v)?;
    let (d1, d2) = line_derivatives(grid, gp, v)?;
    let p = gp.p;
    let k = gp.drift();
    let c = gp.profile_exponent();
    for i in 0..v.len() {
        let x = grid.nodes()[i];
        let bracket = d2[i] + k * line_coord(gp, x) * d1[i] + 0.5 * p * d1[i] * d1[i] / v[i] + c * v[i];
        out[i] = v[i].powf(1.0 - 0.5 * p) * line_factor(gp, x) * bracket;
    }
    Ok(())
}

pub fn rhs_line(v: &GridFunction, gp: &GNParams) -> Result<GridFunction> {
    check_line_grid(&v.grid, gp)?;
    let mut out = vec![0.0; v.values.len()];
    line_rhs_into(&v.grid, gp, &v.values, &mut out)?;
    Ok(v.with_values(out))
}

/// 2∫ f^{1−p/2} |f″ − (p/2)|f′|²/f|² w² with the frame's probability measure.
pub fn ultra_dissipation(grid: &WeightedGrid, gp: &GNParams, f: &[f64]) -> Result<f64> {
    let d1 = grid.diff(f, 1)?;
    let d2 = grid.diff(f, 2)?;
    let p = gp.p;
    let vals: Vec<f64> = (0..f.len())
        .map(|i| {
            let w = ultra_weight(gp, grid.nodes()[i]);
            let r = d2[i] - 0.5 * p * d1[i] * d1[i] / f[i];
            2.0 * f[i].powf(1.0 - 0.5 * p) * r * r * w * w
        })
        .collect();
    Ok(grid.integrate_values(&vals))
}

/// 2∫ w^{−2} (v/v_ref)^{1−p/2} |v″ − (p/2)|v′|²/v + (2/|p−2|) v|² dx with
/// w = 1 − z² (resp. 1 + y²) and v_ref the line optimizer.
pub fn line_dissipation(grid: &WeightedGrid, gp: &GNParams, v: &[f64]) -> Result<f64> {
    let (d1, d2) = line_derivatives(grid, gp, v)?;
    let p = gp.p;
    let c = gp.profile_exponent();
    let star = crate::closed_forms::Optimizer::primal(gp);
    let vals: Vec<f64> = (0..v.len())
        .map(|i| {
            let x = grid.nodes()[i];
            let s = line_coord(gp, x);
            let w = ultra_weight(gp, s);
            let r = d2[i] - 0.5 * p * d1[i] * d1[i] / v[i] + c * v[i];
            2.0 / (w * w) * (v[i] / star.eval_at(x)).powf(1.0 - 0.5 * p) * r * r
        })
        .collect();
    Ok(grid.integrate_values(&vals))
}

fn p_norm(grid: &WeightedGrid, p: f64, v: &[f64]) -> f64 {
    let lp = grid.integrate_values(&v.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    lp.powf(1.0 / p)
}

/// How a flow is evaluated: right-hand side, F, dissipation, conserved norm.
pub(crate) trait FlowModel {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()>;
    fn functional(&self, y: &[f64]) -> Result<f64>;
    fn dissipation(&self, y: &[f64]) -> Result<f64>;
    fn conserved(&self, y: &[f64]) -> f64;
}

struct Ultra<'a> {
    grid: &'a WeightedGrid,
    gp: GNParams,
}

impl FlowModel for Ultra<'_> {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        ultra_rhs_into(self.grid, &self.gp, y, out)
    }
    fn functional(&self, y: &[f64]) -> Result<f64> {
        ultra_functional(self.grid, &self.gp, y)
    }
    fn dissipation(&self, y: &[f64]) -> Result<f64> {
        ultra_dissipation(self.grid, &self.gp, y)
    }
    fn conserved(&self, y: &[f64]) -> f64 {
        p_norm(self.grid, self.gp.p, y)
    }
}

struct Line<'a> {
    grid: &'a WeightedGrid,
    gp: GNParams,
    c: f64,
}

impl FlowModel for Line<'_> {
    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        line_rhs_into(self.grid, &self.gp, y, out)
    }
    fn functional(&self, y: &[f64]) -> Result<f64> {
        let p = self.gp.p;
        let (d, _) = line_derivatives(self.grid, &self.gp, y)?;
        let grad = self.grid.integrate_values(&d.iter().map(|x| x * x).collect::<Vec<_>>());
        let l2 = self.grid.integrate_values(&y.iter().map(|x| x * x).collect::<Vec<_>>());
        let np = p_norm(self.grid, p, y).powi(2);
        let k = 4.0 / ((p - 2.0) * (p - 2.0));
        Ok(match self.gp.regime {
            Regime::Supercritical => grad + k * l2 - self.c * np,
            Regime::Subcritical => grad + self.c * np - k * l2,
        })
    }
    fn dissipation(&self, y: &[f64]) -> Result<f64> {
        line_dissipation(self.grid, &self.gp, y)
    }
    fn conserved(&self, y: &[f64]) -> f64 {
        p_norm(self.grid, self.gp.p, y)
    }
}

/// 𝖥 on raw node values; see [`crate::functionals::lyapunov_ultra`].
pub fn ultra_functional(grid: &WeightedGrid, gp: &GNParams, f: &[f64]) -> Result<f64> {
    let p = gp.p;
    let d = grid.diff(f, 1)?;
    let grad = grid.integrate_values(
        &d.iter()
            .zip(grid.nodes())
            .map(|(x, &z)| x * x * ultra_weight(gp, z))
            .collect::<Vec<_>>(),
    );
    let l2 = grid.integrate_values(&f.iter().map(|x| x * x).collect::<Vec<_>>());
    let np = p_norm(grid, p, f).powi(2);
    let t = gp.threshold();
    Ok(match gp.regime {
        Regime::Supercritical => grad + t * (l2 - np),
        Regime::Subcritical => grad + t * (np - l2),
    })
}

/// −dF/dt at every row from a five-point Fornberg stencil in t.
pub(crate) fn fill_fd_dissipation(rows: &mut [TraceRow]) {
    let n = rows.len();
    if n < 2 {
        return;
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let fs: Vec<f64> = rows.iter().map(|r| r.lyapunov).collect();
    let width = n.min(5);
    for i in 0..n {
        let start = i.saturating_sub(width / 2).min(n - width);
        let w = fornberg_weights(ts[i], &ts[start..start + width], 1);
        let d: f64 = w[1].iter().zip(&fs[start..]).map(|(a, b)| a * b).sum();
        rows[i].dissipation_lhs = -d;
    }
}

pub(crate) fn drive<M: FlowModel>(
    model: &M,
    init: &GridFunction,
    t_end: f64,
    stride: f64,
    control: StepControl,
    dt0: f64,
    grid: &Arc<WeightedGrid>,
) -> Result<FlowTrace> {
    if !(t_end > 0.0) || !(stride > 0.0) {
        return Err(Error::InvalidParams(format!("t_end = {t_end} and stride = {stride} must be positive")));
    }
    if init.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("run_flow", "initial datum must be strictly positive"));
    }
    let mut y = init.values.clone();
    let mut it = Integrator::new(y.len(), control, dt0, true);
    let row = |t: f64, y: &[f64], clamps: usize| -> Result<TraceRow> {
        Ok(TraceRow {
            t,
            lyapunov: model.functional(y)?,
            dissipation_lhs: f64::NAN,
            dissipation_rhs: model.dissipation(y)?,
            conserved_norm: model.conserved(y),
            min_value: y.iter().cloned().fold(f64::INFINITY, f64::min),
            clamp_events: clamps,
        })
    };
    let mut rows = vec![row(0.0, &y, 0)?];
    let mut steps = vec![(0.0, rows[0].lyapunov)];
    let mut t = 0.0;
    let mut failure = None;
    let n_out = (t_end / stride - 1e-9).ceil().max(1.0) as usize;
    let mut rhs = |_t: f64, v: &[f64], out: &mut [f64]| model.rhs(v, out);
    for j in 1..=n_out {
        let target = (j as f64 * stride).min(t_end);
        let mut on_step = |s: f64, v: &[f64]| -> Result<()> {
            steps.push((s, model.functional(v)?));
            Ok(())
        };
        if let Err(e) = it.advance_to(&mut t, &mut y, target, &mut rhs, &mut on_step) {
            failure = Some(e);
            break;
        }
        match row(t, &y, it.clamp_events) {
            Ok(r) => rows.push(r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    fill_fd_dissipation(&mut rows);
    Ok(FlowTrace {
        rows,
        steps,
        accepted: it.accepted,
        rejected: it.rejected,
        final_state: Some(GridFunction {
            grid: grid.clone(),
            strictly_positive: y.iter().all(|&v| v > 0.0),
            values: y,
        }),
        failure,
    })
}

/// Runs the configured flow from `initial`. Step failures end the run early
/// and are reported in `failure` with the partial trace.
pub fn run_flow(cfg: &FlowConfig, initial: &GridFunction) -> Result<FlowTrace> {
    if initial.values.len() != cfg.grid.len() {
        return Err(Error::InvalidParams("initial datum not sampled on the configured grid".into()));
    }
    let norm = p_norm(&cfg.grid, cfg.p.p, &initial.values);
    if let Some(target) = cfg.norm_target {
        if (norm - target).abs() > 1e-8 {
            return Err(Error::InvalidParams(format!(
                "initial p-norm {norm} differs from the target {target}"
            )));
        }
    }
    match cfg.frame {
        Frame::UltraF => {
            check_ultra_grid(&cfg.grid, &cfg.p)?;
            let m = Ultra {
                grid: &cfg.grid,
                gp: cfg.p,
            };
            drive(&m, initial, cfg.t_end, cfg.output_stride, cfg.control, cfg.dt0, &cfg.grid)
        }
        Frame::LineV => {
            check_line_grid(&cfg.grid, &cfg.p)?;
            let m = Line {
                grid: &cfg.grid,
                gp: cfg.p,
                c: line_constant(&cfg.p)?,
            };
            drive(&m, initial, cfg.t_end, cfg.output_stride, cfg.control, cfg.dt0, &cfg.grid)
        }
    }
}

/// Rescales a positive datum so that its p-norm equals the theorem's value.
pub fn normalize_initial(f: &GridFunction, gp: &GNParams, frame: Frame) -> Result<GridFunction> {
    let target = FlowConfig::theorem_norm(gp, frame)?;
    let n = p_norm(&f.grid, gp.p, &f.values);
    if !(n > 0.0) {
        return Err(Error::DivisionByZero("normalize_initial"));
    }
    Ok(f.map(|v| v * target / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifoldPoint {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

/// a′ = −k b², b′ = −k a b with k = 2p/(p−2), sampled at `samples`
/// equispaced times.
pub fn manifold_ode(a0: f64, b0: f64, gp: &GNParams, t_end: f64, samples: usize) -> Result<Vec<ManifoldPoint>> {
    if !gp.is_super() {
        return Err(Error::InvalidParams("the optimizer manifold ODE is stated for p > 2".into()));
    }
    if !(a0 > b0.abs()) {
        return Err(Error::InvalidParams(format!("need a0 > |b0|, got a0 = {a0}, b0 = {b0}")));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidParams("t_end must be positive".into()));
    }
    let k = gp.drift();
    let ctl = StepControl {
        atol: 1e-14,
        rtol: 1e-13,
        ..StepControl::default()
    };
    let mut it = Integrator::new(2, ctl, 1e-4, false);
    let mut rhs = |_t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        out[0] = -k * y[1] * y[1];
        out[1] = -k * y[0] * y[1];
        Ok(())
    };
    let mut y = [a0, b0];
    let mut t = 0.0;
    let samples = samples.max(2);
    let mut out = vec![ManifoldPoint { t: 0.0, a: a0, b: b0 }];
    for j in 1..samples {
        let target = t_end * j as f64 / (samples - 1) as f64;
        it.advance_to(&mut t, &mut y, target, &mut rhs, &mut |_, _| Ok(()))?;
        out.push(ManifoldPoint { t, a: y[0], b: y[1] });
    }
    Ok(out)
}

/// (a + b z)^{−2/(p−2)} on an ultraspherical grid.
pub fn manifold_profile(grid: &Arc<WeightedGrid>, gp: &GNParams, a: f64, b: f64) -> GridFunction {
    let e = -gp.profile_exponent();
    GridFunction::from_fn(grid, |z| (a + b * z).powf(e))
}
