//! Weighted collocation grids, quadrature, differentiation and time stepping.

pub mod interp;
pub mod rk;
pub mod stencil;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::constants::{constants_for, GNParams, Regime};
use crate::error::{Error, Result};

pub use rk::{Integrator, StepControl, StepOutcome};
pub use stencil::{fornberg_weights, DiffMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NuKind {
    /// ν(z) = 1 − z² on (−1, 1)
    OneMinusZ2,
    /// ν(y) = 1 + y² on ℝ
    OnePlusY2,
}

impl NuKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            NuKind::OneMinusZ2 => 1.0 - x * x,
            NuKind::OnePlusY2 => 1.0 + x * x,
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            NuKind::OneMinusZ2 => -2.0 * x,
            NuKind::OnePlusY2 => 2.0 * x,
        }
    }

    pub fn d2(self) -> f64 {
        match self {
            NuKind::OneMinusZ2 => -2.0,
            NuKind::OnePlusY2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Measure {
    Lebesgue { a: f64, b: f64 },
    /// ν^{2/(p−2)} dz / ζ_p on (−1, 1)
    NuP { p: f64 },
    /// ξ^{−2/(2−p)} dy / ζ_p on ℝ
    XiP { p: f64 },
    /// Unnormalised ν^b dx restricted to the grid interval.
    NuPower { nu: NuKind, b: f64 },
}

impl Measure {
    pub fn is_probability(&self) -> bool {
        matches!(self, Measure::NuP { .. } | Measure::XiP { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GridFamily {
    Uniform,
    /// z = −cos θ with θ at cell midpoints of (0, π)
    CosineClustered,
    /// y = s·tan x with x at cell midpoints of a symmetric interval
    TanMapped,
    /// x = atanh(−cos θ) with θ at cell midpoints of (0, π)
    SechMapped,
}

/// How node coordinates relate to the computational coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CompMap {
    Identity,
    Tan(f64),
    Sech,
}

/// A one-dimensional grid with quadrature weights for its measure.
///
/// Derivatives are taken in a computational coordinate `c` (equal to the
/// node coordinate except on tan-mapped grids) and converted with the
/// stored Jacobians.
#[derive(Debug, Clone)]
pub struct WeightedGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    measure: Measure,
    family: GridFamily,
    truncation_radius: Option<f64>,
    comp: Vec<f64>,
    map: CompMap,
    jac1: Vec<f64>,
    jac2: Vec<f64>,
    d1: DiffMatrix,
    d2: DiffMatrix,
}

/// Composite Simpson weights for `n` equally spaced points of spacing `h`
/// (a 3/8 panel closes an odd number of intervals).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 4);
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    let mut i = 0;
    while i < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if intervals % 2 == 1 {
        let s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Fejér's first rule on (−1, 1) at the nodes cos θ_k, θ_k = (k + ½)π/n.
/// All weights are positive.
pub fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let th = PI * (k as f64 + 0.5) / n as f64;
            let s: f64 = (1..=n / 2)
                .map(|j| (2.0 * j as f64 * th).cos() / (4.0 * (j * j) as f64 - 1.0))
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

fn check_size(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::InvalidParams(format!("grid needs at least 8 nodes, got {n}")));
    }
    Ok(())
}

impl WeightedGrid {
    fn assemble(
        comp: Vec<f64>,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        jac: Option<(Vec<f64>, Vec<f64>, CompMap)>,
        measure: Measure,
        family: GridFamily,
        truncation_radius: Option<f64>,
    ) -> Self {
        let n = nodes.len();
        let (jac1, jac2, map) = match jac {
            Some((a, b, m)) => (a, b, m),
            None => (vec![1.0; n], vec![0.0; n], CompMap::Identity),
        };
        WeightedGrid {
            d1: DiffMatrix::build(&comp, 1, 5),
            d2: DiffMatrix::build(&comp, 2, 6),
            comp,
            map,
            nodes,
            weights,
            measure,
            family,
            truncation_radius,
            jac1,
            jac2,
        }
    }

    /// Uniform nodes on [a, b] including both ends; Simpson weights for dx.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        check_size(n)?;
        if !(b > a) {
            return Err(Error::InvalidParams(format!("empty interval [{a}, {b}]")));
        }
        let h = (b - a) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        let weights = simpson_weights(n, h);
        Ok(Self::assemble(
            nodes.clone(),
            nodes,
            weights,
            None,
            Measure::Lebesgue { a, b },
            GridFamily::Uniform,
            None,
        ))
    }

    /// Cell midpoints of n equal cells of (a, b) with midpoint weights. Suited
    /// to integrands vanishing to high order at both ends.
    pub fn midpoint(a: f64, b: f64, n: usize) -> Result<Self> {
        check_size(n)?;
        if !(b > a) {
            return Err(Error::InvalidParams(format!("empty interval ({a}, {b})")));
        }
        let h = (b - a) / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| a + h * (i as f64 + 0.5)).collect();
        Ok(Self::assemble(
            nodes.clone(),
            nodes,
            vec![h; n],
            None,
            Measure::Lebesgue { a, b },
            GridFamily::Uniform,
            None,
        ))
    }

    /// Uniform nodes on [a, b] with Simpson weights for ν^b dx.
    pub fn weighted_uniform(nu: NuKind, b: f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let base = Self::uniform(lo, hi, n)?;
        if nu == NuKind::OneMinusZ2 && (lo <= -1.0 || hi >= 1.0) && b < 0.0 {
            return Err(Error::InvalidParams("ν^b with b < 0 is singular at z = ±1".into()));
        }
        let weights = base
            .weights
            .iter()
            .zip(&base.nodes)
            .map(|(w, &x)| w * nu.eval(x).max(0.0).powf(b))
            .collect();
        Ok(WeightedGrid {
            weights,
            measure: Measure::NuPower { nu, b },
            ..base
        })
    }

    /// Heavy-tail grid for dx on ℝ: y = s·tan x, x at the n cell midpoints
    /// of (−X, X) with X = atan(R/s). Weights are the midpoint rule in x.
    pub fn lebesgue_tan(radius: f64, scale: f64, n: usize) -> Result<Self> {
        check_size(n)?;
        if !(radius > 0.0 && scale > 0.0) {
            return Err(Error::InvalidParams("radius and scale must be positive".into()));
        }
        let xmax = (radius / scale).atan();
        let hx = 2.0 * xmax / n as f64;
        let comp: Vec<f64> = (0..n).map(|i| -xmax + hx * (i as f64 + 0.5)).collect();
        let nodes: Vec<f64> = comp.iter().map(|&x| scale * x.tan()).collect();
        let jac1: Vec<f64> = comp.iter().map(|&x| scale / x.cos().powi(2)).collect();
        let weights = jac1.iter().map(|j| hx * j).collect();
        let jac2: Vec<f64> = comp
            .iter()
            .map(|&x| 2.0 * scale * x.tan() / x.cos().powi(2))
            .collect();
        Ok(Self::assemble(
            comp,
            nodes,
            weights,
            Some((jac1, jac2, CompMap::Tan(scale))),
            Measure::Lebesgue {
                a: -radius,
                b: radius,
            },
            GridFamily::TanMapped,
            Some(radius),
        ))
    }

    /// Grid for dx on all of ℝ with x = atanh(−cos θ), θ at the n cell
    /// midpoints of (0, π): the image of the dν_p nodes under z = tanh x.
    /// Weights are Fejér's rule in z = tanh x divided by 1 − z², so that
    /// integrands of the form (smooth in z)·sech²x are integrated spectrally.
    pub fn line_sech(n: usize) -> Result<Self> {
        check_size(n)?;
        let h = PI / n as f64;
        let comp: Vec<f64> = (0..n).map(|i| h * (i as f64 + 0.5)).collect();
        let nodes: Vec<f64> = comp.iter().map(|t| (-t.cos()).atanh()).collect();
        let jac1: Vec<f64> = comp.iter().map(|t| 1.0 / t.sin()).collect();
        let jac2: Vec<f64> = comp.iter().map(|t| -t.cos() / t.sin().powi(2)).collect();
        let weights = fejer_weights(n)
            .iter()
            .zip(&comp)
            .map(|(w, t)| w / t.sin().powi(2))
            .collect();
        let radius = nodes[n - 1];
        Ok(Self::assemble(
            comp,
            nodes,
            weights,
            Some((jac1, jac2, CompMap::Sech)),
            Measure::Lebesgue {
                a: f64::NEG_INFINITY,
                b: f64::INFINITY,
            },
            GridFamily::SechMapped,
            Some(radius),
        ))
    }

    /// Probability grid for dν_p on (−1, 1), p > 2.
    ///
    /// Nodes z = −cos θ at midpoints of n cells in θ, so no node sits on
    /// the degenerate endpoints; Fejér weights times ν^{2/(p−2)},
    /// renormalised.
    pub fn nu_p(gp: &GNParams, n: usize) -> Result<Self> {
        check_size(n)?;
        if gp.regime != Regime::Supercritical {
            return Err(Error::InvalidParams("dν_p requires p > 2".into()));
        }
        let r = 2.0 / (gp.p - 2.0);
        let h = PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|i| h * (i as f64 + 0.5)).collect();
        let nodes: Vec<f64> = theta.iter().map(|t| -t.cos()).collect();
        let raw: Vec<f64> = fejer_weights(n)
            .iter()
            .zip(&theta)
            .map(|(w, t)| w * t.sin().powf(2.0 * r))
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self::assemble(
            nodes.clone(),
            nodes,
            weights,
            None,
            Measure::NuP { p: gp.p },
            GridFamily::CosineClustered,
            None,
        ))
    }

    /// Probability grid for dξ_p on ℝ, 1 < p < 2.
    ///
    /// y = tan x with x at midpoints of n cells of (−π/2, π/2). The outer
    /// cells carry the tails, so the recorded truncation radius is the
    /// outermost node.
    pub fn xi_p(gp: &GNParams, n: usize) -> Result<Self> {
        check_size(n)?;
        if gp.regime != Regime::Subcritical {
            return Err(Error::InvalidParams("dξ_p requires 1 < p < 2".into()));
        }
        let r = 2.0 * gp.p / (2.0 - gp.p);
        let h = PI / n as f64;
        let comp: Vec<f64> = (0..n).map(|i| -PI / 2.0 + h * (i as f64 + 0.5)).collect();
        let nodes: Vec<f64> = comp.iter().map(|x| x.tan()).collect();
        let raw: Vec<f64> = comp.iter().map(|x| h * x.cos().powf(r)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let jac1: Vec<f64> = comp.iter().map(|&x| 1.0 / x.cos().powi(2)).collect();
        let jac2: Vec<f64> = comp.iter().map(|&x| 2.0 * x.tan() / x.cos().powi(2)).collect();
        let radius = nodes[n - 1];
        Ok(Self::assemble(
            comp,
            nodes,
            weights,
            Some((jac1, jac2, CompMap::Tan(1.0))),
            Measure::XiP { p: gp.p },
            GridFamily::TanMapped,
            Some(radius),
        ))
    }

    /// The natural probability grid of the regime: dν_p or dξ_p.
    pub fn ultraspherical(gp: &GNParams, n: usize) -> Result<Self> {
        match gp.regime {
            Regime::Supercritical => Self::nu_p(gp, n),
            Regime::Subcritical => Self::xi_p(gp, n),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn family(&self) -> GridFamily {
        self.family
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.truncation_radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ vᵢ
    pub fn integrate_values(&self, v: &[f64]) -> f64 {
        self.weights.iter().zip(v).map(|(w, x)| w * x).sum()
    }

    /// Normalisation ζ_p hidden in the probability weights (1 otherwise).
    /// Multiplying by it converts a dν_p / dξ_p integral to the
    /// unnormalised weight ν^{2/(p−2)} dz or ξ^{−2/(2−p)} dy.
    pub fn zeta(&self) -> f64 {
        match self.measure {
            Measure::NuP { p } | Measure::XiP { p } => GNParams::new(p)
                .and_then(|g| constants_for(&g))
                .map(|t| t.zeta_p)
                .unwrap_or(1.0),
            _ => 1.0,
        }
    }

    /// Derivative of order 1 or 2 with respect to the node coordinate.
    pub fn diff(&self, v: &[f64], order: usize) -> Result<Vec<f64>> {
        match order {
            1 => {
                let mut out = self.d1.apply(v);
                for (o, j) in out.iter_mut().zip(&self.jac1) {
                    *o /= j;
                }
                Ok(out)
            }
            2 => {
                let dc = self.d1.apply(v);
                let mut out = self.d2.apply(v);
                for i in 0..out.len() {
                    let fy = dc[i] / self.jac1[i];
                    out[i] = (out[i] - self.jac2[i] * fy) / (self.jac1[i] * self.jac1[i]);
                }
                Ok(out)
            }
            _ => Err(Error::InvalidParams(format!("derivative order {order} not in {{1,2}}"))),
        }
    }

    /// Computational coordinate of a point in node coordinates.
    pub fn to_comp(&self, y: f64) -> f64 {
        match self.map {
            CompMap::Tan(s) => (y / s).atan(),
            CompMap::Sech => (-y.tanh()).acos(),
            CompMap::Identity => y,
        }
    }

    /// dy/dc at the nodes.
    pub fn jacobian(&self) -> &[f64] {
        &self.jac1
    }

    /// Node coordinate of a computational coordinate.
    pub fn from_comp(&self, c: f64) -> f64 {
        match self.map {
            CompMap::Tan(s) => s * c.tan(),
            CompMap::Sech => (-c.cos()).atanh(),
            CompMap::Identity => c,
        }
    }

    pub fn comp_nodes(&self) -> &[f64] {
        &self.comp
    }

    /// Whether `y` lies in the closed node range.
    pub fn spans(&self, y: f64) -> bool {
        let c = self.to_comp(y);
        let (lo, hi) = (self.comp[0], self.comp[self.comp.len() - 1]);
        let slack = 1e-12 * (hi - lo);
        c >= lo - slack && c <= hi + slack
    }

    /// Six-point Lagrange interpolation in the computational coordinate.
    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        interp::lagrange6(&self.comp, values, self.to_comp(y))
    }

    /// (D₁)ᵀ v for the first-derivative operator of [`diff`](Self::diff).
    pub fn diff1_transpose(&self, v: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = v.iter().zip(&self.jac1).map(|(a, j)| a / j).collect();
        self.d1.apply_transpose(&scaled)
    }
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `a`
/// (a[0] unused), diagonal `b` and super-diagonal `c` (last entry unused).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Tridiagonal solve by Gaussian elimination with partial pivoting, for
/// indefinite systems where the plain Thomas recursion breaks down.
pub fn solve_tridiagonal_pivoted(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut dl: Vec<f64> = a[1..].to_vec();
    let mut dg = b.to_vec();
    let mut du = c[..n - 1].to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = d.to_vec();
    for i in 0..n - 1 {
        if dg[i].abs() >= dl[i].abs() {
            let fact = dl[i] / dg[i];
            dg[i + 1] -= fact * du[i];
            x[i + 1] -= fact * x[i];
            dl[i] = 0.0;
        } else {
            let fact = dg[i] / dl[i];
            dg[i] = dl[i];
            let tmp = dg[i + 1];
            dg[i + 1] = du[i] - fact * tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            du[i] = tmp;
            let t = x[i];
            x[i] = x[i + 1];
            x[i + 1] = t - fact * x[i + 1];
        }
    }
    x[n - 1] /= dg[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dg[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dg[i];
    }
    x
}

/// Values sampled on a shared grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<WeightedGrid>,
    pub values: Vec<f64>,
    pub strictly_positive: bool,
}

impl GridFunction {
    pub fn new(grid: Arc<WeightedGrid>, values: Vec<f64>, strictly_positive: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if strictly_positive && values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::domain("GridFunction", "flagged strictly positive but has values ≤ 0"));
        }
        Ok(GridFunction {
            grid,
            values,
            strictly_positive,
        })
    }

    pub fn from_fn(grid: &Arc<WeightedGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
        let strictly_positive = values.iter().all(|&v| v > 0.0);
        GridFunction {
            grid: grid.clone(),
            values,
            strictly_positive,
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        let strictly_positive = values.iter().all(|&v| v > 0.0);
        GridFunction {
            grid: self.grid.clone(),
            values,
            strictly_positive,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate_values(&self.values)
    }

    pub fn derivative(&self, order: usize) -> Result<GridFunction> {
        Ok(self.with_values(self.grid.diff(&self.values, order)?))
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn integrate(f: &GridFunction) -> f64 {
    f.integrate()
}

pub fn derivative(f: &GridFunction, order: usize) -> Result<GridFunction> {
    f.derivative(order)
}

/// One adaptive Dormand-Prince step on a grid function. Rejected attempts
/// halve `dt`; a strictly positive input is floored after the step.
pub fn step_explicit<F>(state: &GridFunction, mut rhs: F, dt: f64, ctl: &StepControl) -> Result<(GridFunction, StepOutcome)>
where
    F: FnMut(&GridFunction) -> Result<GridFunction>,
{
    let mut y = state.values.clone();
    let mut work = rk::Dp45::new(y.len());
    let grid = state.grid.clone();
    let mut raw = |_t: f64, v: &[f64], out: &mut [f64]| -> Result<()> {
        let g = GridFunction {
            grid: grid.clone(),
            values: v.to_vec(),
            strictly_positive: false,
        };
        let r = rhs(&g)?;
        if r.values.len() != out.len() {
            return Err(Error::InvalidParams("rhs returned wrong length".into()));
        }
        out.copy_from_slice(&r.values);
        Ok(())
    };
    let outcome = work.step(0.0, &mut y, dt, ctl, &mut raw)?;
    if state.strictly_positive {
        rk::apply_floor(&mut y, ctl.floor);
    }
    let next = GridFunction {
        grid: state.grid.clone(),
        strictly_positive: state.strictly_positive,
        values: y,
    };
    Ok((next, outcome))
}
