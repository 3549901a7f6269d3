//! Monotone coupling of two densities on the line and the step-by-step
//! transport chain behind the duality inequalities.

use serde::Serialize;

use crate::constants::{GNParams, Regime};
use crate::error::{Error, Result};
use crate::grid::interp::Pchip;
use crate::grid::{GridFunction, Measure, WeightedGrid};

#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// F, normalized to unit mass.
    pub source: GridFunction,
    /// G, normalized to unit mass.
    pub target: GridFunction,
    /// φ′ on the source grid.
    pub map_derivative: GridFunction,
    /// φ″ on the source grid.
    pub map_second: GridFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardCheck {
    pub test: &'static str,
    /// ∫ t(φ′(x)) F(x) dx
    pub source_side: f64,
    /// ∫ t(y) G(y) dy
    pub target_side: f64,
    pub error: f64,
}

type TestFn = (&'static str, fn(f64) -> f64);

const BATTERY: [TestFn; 5] = [
    ("cauchy", |y| 1.0 / (1.0 + y * y)),
    ("atan", f64::atan),
    ("gauss", |y| (-0.5 * y * y).exp()),
    ("odd_gauss", |y| y * (-0.25 * y * y).exp()),
    ("tanh_sq", |y| (0.5 * y).tanh().powi(2)),
];

fn require_line(f: &GridFunction, what: &str) -> Result<()> {
    match f.grid.measure() {
        Measure::Lebesgue { .. } => Ok(()),
        m => Err(Error::DomainMismatch(format!("{what} must live on a Lebesgue grid, got {m:?}"))),
    }
}

fn normalized(f: &GridFunction, what: &str) -> Result<GridFunction> {
    require_line(f, what)?;
    let scale = f.max().abs().max(f.min().abs());
    if f.values.iter().any(|v| !v.is_finite() || *v < -1e-14 * scale) {
        return Err(Error::InvalidParams(format!("{what} must be a finite non-negative density")));
    }
    let mass = f.integrate();
    if !(mass > 0.0) {
        return Err(Error::DivisionByZero("build_transport: zero mass"));
    }
    Ok(f.map(|v| v.max(0.0) / mass))
}

/// Normalized cumulative distribution at the nodes, by the trapezoid rule in
/// the computational coordinate with an endpoint derivative correction.
/// Also returns the computational interval covered by the measure.
pub(crate) fn cdf_at_nodes(grid: &WeightedGrid, density: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let c = grid.comp_nodes();
    let n = c.len();
    let g: Vec<f64> = density.iter().zip(grid.jacobian()).map(|(v, j)| v * j).collect();
    let dg: Vec<f64> = grid.diff(&g, 1)?.iter().zip(grid.jacobian()).map(|(d, j)| d * j).collect();
    let (a, b) = match grid.measure() {
        Measure::Lebesgue { a, b } => (grid.to_comp(a), grid.to_comp(b)),
        _ => (c[0], c[n - 1]),
    };
    let mut acc = g[0] * (c[0] - a).max(0.0);
    let mut cdf = Vec::with_capacity(n);
    cdf.push(acc);
    for i in 0..n - 1 {
        let h = c[i + 1] - c[i];
        let piece = 0.5 * h * (g[i] + g[i + 1]) - h * h / 12.0 * (dg[i + 1] - dg[i]);
        acc += piece.max(0.0);
        cdf.push(acc);
    }
    let total = acc + g[n - 1] * (b - c[n - 1]).max(0.0);
    if !(total > 0.0) {
        return Err(Error::DivisionByZero("cumulative distribution"));
    }
    for v in cdf.iter_mut() {
        *v /= total;
    }
    Ok((cdf, a, b))
}

/// Quantile function of a density on its grid, as a map u ↦ y.
pub(crate) struct Quantile<'a> {
    grid: &'a WeightedGrid,
    interp: Pchip,
}

impl<'a> Quantile<'a> {
    pub(crate) fn new(grid: &'a WeightedGrid, density: &[f64]) -> Result<Self> {
        let (cdf, a, b) = cdf_at_nodes(grid, density)?;
        let c = grid.comp_nodes();
        let n = c.len();
        let lo = if a < c[0] - 1e-14 { c[0] - 0.25 * (c[1] - c[0]) } else { c[0] };
        let hi = if b > c[n - 1] + 1e-14 { c[n - 1] + 0.25 * (c[n - 1] - c[n - 2]) } else { c[n - 1] };
        let mut us = vec![0.0];
        let mut cs = vec![lo];
        for (u, &ci) in cdf.iter().zip(c) {
            if *u > *us.last().unwrap() && *u < 1.0 {
                us.push(*u);
                cs.push(ci);
            }
        }
        us.push(1.0);
        cs.push(hi);
        Ok(Quantile {
            grid,
            interp: Pchip::new(us, cs),
        })
    }

    pub(crate) fn eval(&self, u: f64) -> f64 {
        self.grid.from_comp(self.interp.eval(u.clamp(0.0, 1.0)))
    }
}

/// The monotone coupling φ′ = Q_G ∘ CDF_F.
pub fn build_transport(f: &GridFunction, g: &GridFunction) -> Result<TransportPlan> {
    let source = normalized(f, "source density")?;
    let target = normalized(g, "target density")?;
    let (u, _, _) = cdf_at_nodes(&source.grid, &source.values)?;
    let q = Quantile::new(&target.grid, &target.values)?;
    let mut phi1: Vec<f64> = u.iter().map(|&v| q.eval(v)).collect();
    for i in 1..phi1.len() {
        if phi1[i] < phi1[i - 1] {
            phi1[i] = phi1[i - 1];
        }
    }
    let phi2: Vec<f64> = source.grid.diff(&phi1, 1)?.into_iter().map(|v| v.max(0.0)).collect();
    Ok(TransportPlan {
        map_derivative: source.with_values(phi1),
        map_second: source.with_values(phi2),
        source,
        target,
    })
}

impl TransportPlan {
    pub fn pushforward_battery(&self) -> Vec<PushforwardCheck> {
        BATTERY
            .iter()
            .map(|(name, t)| {
                let src: Vec<f64> = self
                    .source
                    .values
                    .iter()
                    .zip(&self.map_derivative.values)
                    .map(|(fv, &y)| t(y) * fv)
                    .collect();
                let tgt: Vec<f64> = self.target.values.iter().zip(self.target.nodes()).map(|(gv, &y)| t(y) * gv).collect();
                let (a, b) = (self.source.grid.integrate_values(&src), self.target.grid.integrate_values(&tgt));
                PushforwardCheck {
                    test: name,
                    source_side: a,
                    target_side: b,
                    error: (a - b).abs(),
                }
            })
            .collect()
    }

    pub fn max_pushforward_error(&self) -> f64 {
        self.pushforward_battery().iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.map_derivative.values.windows(2).all(|w| w[1] >= w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChainStepName {
    /// ∫G^θ = ∫F^θ (φ″)^{1−θ}
    ChangeOfVariables,
    /// ∫F^θ(φ″)^{1−θ} ≤ (∫F^{1−α/θ})^θ (∫F^{α/(1−θ)}φ″)^{1−θ}
    Holder,
    /// ∫F^{α/(1−θ)}φ″ = −(α r/(1−θ)) ∫√F φ′ f′ with f = F^{1/r}
    IntegrationByParts,
    /// −∫√F φ′ f′ ≤ (∫F|φ′|²)^{1/2} (∫|f′|²)^{1/2}
    CauchySchwarz,
    /// ∫F|φ′|² = ∫G|y|²
    MomentTransfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Equality,
    Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub name: ChainStepName,
    pub kind: StepKind,
    pub lhs: f64,
    pub rhs: f64,
    /// (rhs − lhs)/|rhs| for an inequality, (lhs − rhs)/|rhs| for an equality.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub p: f64,
    pub theta: f64,
    pub alpha: f64,
    pub steps: Vec<ChainStep>,
}

impl ChainReport {
    pub fn step(&self, name: ChainStepName) -> &ChainStep {
        self.steps.iter().find(|s| s.name == name).expect("every step is reported")
    }

    pub fn inequalities(&self) -> impl Iterator<Item = &ChainStep> {
        self.steps.iter().filter(|s| s.kind == StepKind::Inequality)
    }

    pub fn min_inequality_slack(&self) -> f64 {
        self.inequalities().map(|s| s.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn max_inequality_slack(&self) -> f64 {
        self.inequalities().map(|s| s.slack).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// (θ, α, r): the Hölder exponents and the power with f = F^{1/r}.
pub fn chain_exponents(gp: &GNParams) -> (f64, f64, f64) {
    let p = gp.p;
    match gp.regime {
        Regime::Supercritical => {
            let s = 3.0 * p - 2.0;
            ((p + 2.0) / s, (p - 2.0) * (p + 2.0) / (p * s), p)
        }
        Regime::Subcritical => {
            let t = 2.0 / (4.0 - p);
            (t, 1.0 - t, 2.0)
        }
    }
}

fn step(name: ChainStepName, kind: StepKind, lhs: f64, rhs: f64) -> ChainStep {
    let scale = rhs.abs().max(f64::MIN_POSITIVE);
    let slack = match kind {
        StepKind::Inequality => (rhs - lhs) / scale,
        StepKind::Equality => (lhs - rhs) / scale,
    };
    ChainStep {
        name,
        kind,
        lhs,
        rhs,
        slack,
    }
}

/// Evaluates every step of the transport proof along a plan. All integrals
/// over the source use the same quadrature, so the two inequality steps hold
/// for the discrete sums themselves.
pub fn verify_plan_chain(plan: &TransportPlan, gp: &GNParams) -> Result<ChainReport> {
    let (theta, alpha, r) = chain_exponents(gp);
    let k = alpha / (1.0 - theta);
    let grid = &plan.source.grid;
    let fv = &plan.source.values;
    let t = &plan.map_derivative.values;
    let d = &plan.map_second.values;
    let int = |h: &dyn Fn(usize) -> f64| -> f64 { grid.integrate_values(&(0..fv.len()).map(h).collect::<Vec<_>>()) };
    let lhs0 = plan
        .target
        .grid
        .integrate_values(&plan.target.values.iter().map(|g| g.powf(theta)).collect::<Vec<_>>());
    let cov = int(&|i| fv[i].powf(theta) * d[i].powf(1.0 - theta));
    let ibp = int(&|i| fv[i].powf(k) * d[i]);
    let holder_rhs = int(&|i| fv[i].powf(1.0 - alpha / theta)).powf(theta) * ibp.powf(1.0 - theta);
    let froot: Vec<f64> = fv.iter().map(|v| v.powf(1.0 / r)).collect();
    let df = grid.diff(&froot, 1)?;
    let cross = -int(&|i| fv[i].sqrt() * t[i] * df[i]);
    let moment = int(&|i| fv[i] * t[i] * t[i]);
    let grad = int(&|i| df[i] * df[i]);
    let target_moment = plan
        .target
        .grid
        .integrate_values(&plan.target.values.iter().zip(plan.target.nodes()).map(|(g, y)| g * y * y).collect::<Vec<_>>());
    let c = k * r;
    let steps = vec![
        step(ChainStepName::ChangeOfVariables, StepKind::Equality, lhs0, cov),
        step(ChainStepName::Holder, StepKind::Inequality, cov, holder_rhs),
        step(ChainStepName::IntegrationByParts, StepKind::Equality, ibp, c * cross),
        step(
            ChainStepName::CauchySchwarz,
            StepKind::Inequality,
            c * cross.abs(),
            c * (moment * grad).sqrt(),
        ),
        step(ChainStepName::MomentTransfer, StepKind::Equality, moment, target_moment),
    ];
    Ok(ChainReport {
        p: gp.p,
        theta,
        alpha,
        steps,
    })
}

pub fn verify_chain(f: &GridFunction, g: &GridFunction, gp: &GNParams) -> Result<ChainReport> {
    verify_plan_chain(&build_transport(f, g)?, gp)
}
