//! Numerical inf of the primal quotient and sup of the dual quotient.

use serde::Serialize;

use crate::closed_forms::Optimizer;
use crate::constants::{constants_for, GNParams, Regime};
use crate::error::{Error, Result};
use crate::functionals::{dual_from_moments, primal_from_norms};
use crate::grid::{solve_tridiagonal, GridFunction, Measure};
use crate::special::h_of_q;

pub const MAX_ITERATIONS: usize = 5000;
pub const STOP_CHANGE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Solution {
    pub function: GridFunction,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn require_line(f: &GridFunction) -> Result<()> {
    match f.grid.measure() {
        Measure::Lebesgue { .. } => Ok(()),
        m => Err(Error::DomainMismatch(format!("quotients are taken on the line, got {m:?}"))),
    }
}

/// Exponents (e_a, e_b, e_p) with ln Q = e_a ln‖f′‖ + e_b ln‖f‖₂ + e_p ln‖f‖_p.
fn primal_exponents(gp: &GNParams) -> (f64, f64, f64) {
    let p = gp.p;
    match gp.regime {
        Regime::Supercritical => {
            let s = 3.0 * p - 2.0;
            (2.0 * (p - 2.0) / s, 2.0 * (p + 2.0) / s, -4.0 * p / s)
        }
        Regime::Subcritical => {
            let s = 4.0 - p;
            ((2.0 - p) / s, -(p + 2.0) / s, 2.0 * p / s)
        }
    }
}

struct PrimalEval {
    ln_q: f64,
    grad: Vec<f64>,
    a: f64,
    b: f64,
    lp: f64,
}

const LAPLACE5: [f64; 3] = [5.0 / 2.0, -4.0 / 3.0, 1.0 / 12.0];

/// h²·(−f″) by the fourth-order five-point stencil, zero beyond the ends.
fn neg_laplacian(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let at = |i: isize| if i >= 0 && (i as usize) < n { v[i as usize] } else { 0.0 };
    (0..n as isize)
        .map(|i| LAPLACE5[0] * at(i) + LAPLACE5[1] * (at(i - 1) + at(i + 1)) + LAPLACE5[2] * (at(i - 2) + at(i + 2)))
        .collect()
}

fn uniform_spacing(f: &GridFunction) -> Result<f64> {
    let x = f.nodes();
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::DomainMismatch("the primal solver needs equally spaced nodes".into()));
    }
    Ok(h)
}

/// The quotient with ∫|f′|² = h Σ f(−Δ₅f)/h² and trapezoid sums. Unlike the
/// central-difference energy, this form penalizes the sawtooth mode.
fn primal_eval(f: &GridFunction, gp: &GNParams, h: f64, with_grad: bool) -> Result<PrimalEval> {
    let p = gp.p;
    let kf = neg_laplacian(&f.values);
    let a: f64 = f.values.iter().zip(&kf).map(|(v, k)| v * k).sum::<f64>() / h;
    let b: f64 = h * f.values.iter().map(|v| v * v).sum::<f64>();
    let lp: f64 = h * f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>();
    let ln_q = primal_from_norms(a, b, lp, gp)?.ln();
    let mut grad = Vec::new();
    if with_grad {
        let (ea, eb, ep) = primal_exponents(gp);
        grad = (0..f.values.len())
            .map(|j| {
                let v = f.values[j];
                ea / a * kf[j] / h + eb / b * h * v + ep / lp * h * v.abs().powf(p - 2.0) * v
            })
            .collect();
    }
    Ok(PrimalEval { ln_q, grad, a, b, lp })
}

/// Minimizes the scale-invariant primal quotient on an equally spaced grid by
/// preconditioned gradient descent, renormalizing ‖f‖_p = 1 after every step. The preconditioner is
/// the discrete H¹ operator −∂²/∫|f′|² + 1/∫f². For p < 2 iterates are kept
/// strictly positive.
pub fn solve_primal(gp: &GNParams, start: &GridFunction) -> Result<Solution> {
    require_line(start)?;
    if start.values.iter().any(|v| !v.is_finite()) || start.values.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidParams("start must be a finite nonzero grid function".into()));
    }
    let positive = !gp.is_super();
    let floor = 1e-14 * start.max().abs().max(start.min().abs());
    let mut f = start.clone();
    if positive {
        for v in f.values.iter_mut() {
            *v = v.abs().max(floor);
        }
    }
    renormalize(&mut f, gp.p);
    let x = f.grid.nodes().to_vec();
    let n = x.len();
    let h = uniform_spacing(&f)?;
    let (_, _, ep) = primal_exponents(gp);
    let mut cur = primal_eval(&f, gp, h, true)?;
    let mut step: f64 = 1.0;
    let mut quiet = 0;
    for it in 1..=MAX_ITERATIONS {
        // (S/A + L/B) d = −g with stiffness S and lumped mass L
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            let hl = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let hr = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            let mass = 0.5 * (hl + hr);
            diag[i] = mass / cur.b;
            if positive {
                // curvature of ln ∫|f|^p, singular where f is small
                diag[i] += ep * (gp.p - 1.0) / cur.lp * h * f.values[i].abs().powf(gp.p - 2.0);
            }
            if i > 0 {
                sub[i] = -1.0 / (hl * cur.a);
                diag[i] += 1.0 / (hl * cur.a);
            }
            if i + 1 < n {
                sup[i] = -1.0 / (hr * cur.a);
                diag[i] += 1.0 / (hr * cur.a);
            }
        }
        let rhs: Vec<f64> = cur.grad.iter().map(|g| -g).collect();
        let mut d = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        // Remove the dilation generator x f′ + f/2 in the preconditioner
        // metric. The continuum quotient is flat along it, and the discrete
        // one decreases as f becomes unresolved.
        let df = f.grid.diff(&f.values, 1)?;
        let v: Vec<f64> = (0..n).map(|i| x[i] * df[i] + 0.5 * f.values[i]).collect();
        let mv: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = diag[i] * v[i];
                if i > 0 {
                    acc += sub[i] * v[i - 1];
                }
                if i + 1 < n {
                    acc += sup[i] * v[i + 1];
                }
                acc
            })
            .collect();
        let vmv: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let vmd: f64 = mv.iter().zip(&d).map(|(a, b)| a * b).sum();
        if vmv > 0.0 {
            for (di, vi) in d.iter_mut().zip(&v) {
                *di -= vmd / vmv * vi;
            }
        }
        let slope: f64 = d.iter().zip(&cur.grad).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return Ok(Solution {
                value: cur.ln_q.exp(),
                function: f,
                iterations: it,
                converged: true,
            });
        }
        let mut t = (2.0 * step).min(1e6);
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = f.with_values(f.values.iter().zip(&d).map(|(v, dv)| v + t * dv).collect());
            if positive {
                for v in trial.values.iter_mut() {
                    *v = v.max(floor);
                }
            }
            if let Ok(e) = primal_eval(&trial, gp, h, false) {
                if e.ln_q <= cur.ln_q + 1e-4 * t * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(mut next) = accepted else {
            return Ok(Solution {
                value: cur.ln_q.exp(),
                function: f,
                iterations: it,
                converged: true,
            });
        };
        step = t;
        renormalize(&mut next, gp.p);
        let e = primal_eval(&next, gp, h, true)?;
        let change = (cur.ln_q - e.ln_q).abs();
        f = next;
        cur = e;
        quiet = if change < STOP_CHANGE { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(Solution {
                value: cur.ln_q.exp(),
                function: f,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(Solution {
        value: cur.ln_q.exp(),
        function: f,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

fn renormalize(f: &mut GridFunction, p: f64) {
    let lp = f.grid.integrate_values(&f.values.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>());
    let s = lp.powf(-1.0 / p);
    for v in f.values.iter_mut() {
        *v *= s;
    }
}

fn dual_parts(g: &[f64], y: &[f64], w: &[f64], m: f64) -> (f64, f64, f64) {
    let mut gm = 0.0;
    let mut mom = 0.0;
    let mut mass = 0.0;
    for i in 0..g.len() {
        gm += w[i] * g[i].powf(m);
        mom += w[i] * g[i] * y[i] * y[i];
        mass += w[i] * g[i];
    }
    (gm, mom, mass)
}

/// Maximizes the dual quotient by multiplicative updates
/// ln G ← (1−η) ln G + η ln T[G], where T[G] = ((∫G^m/m)(a y²/∫G|y|² + b/∫G))^{−1/(1−m)}
/// solves the stationarity condition with the moments of G frozen. η is
/// halved whenever the quotient would decrease. Zero values of the start are
/// lifted to a tiny positive floor.
pub fn solve_dual(gp: &GNParams, start: &GridFunction) -> Result<Solution> {
    require_line(start)?;
    if start.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParams("start must be finite and non-negative".into()));
    }
    let (m, a, b) = gp.dual_exponents();
    let y = start.grid.nodes();
    let w = start.grid.weights();
    let top = start.max();
    if !(top > 0.0) {
        return Err(Error::DivisionByZero("solve_dual: zero start"));
    }
    let mut lg: Vec<f64> = start.values.iter().map(|v| (v / top).max(1e-300).ln()).collect();
    let value_of = |lg: &[f64]| -> Result<(f64, (f64, f64, f64))> {
        let g: Vec<f64> = lg.iter().map(|v| v.exp()).collect();
        let parts = dual_parts(&g, y, w, m);
        Ok((dual_from_moments(parts.0, parts.1, parts.2, gp)?, parts))
    };
    let (mut value, mut parts) = value_of(&lg)?;
    let mut eta: f64 = 1.0;
    let mut quiet = 0;
    for it in 1..=MAX_ITERATIONS {
        let (gm, mom, mass) = parts;
        let lt: Vec<f64> = y
            .iter()
            .map(|yy| -((gm / m) * (a * yy * yy / mom + b / mass)).ln() / (1.0 - m))
            .collect();
        let mut accepted = None;
        while eta > 1e-12 {
            let trial: Vec<f64> = lg.iter().zip(&lt).map(|(l, t)| (1.0 - eta) * l + eta * t).collect();
            // keep magnitudes in range; the quotient is scale invariant
            let top = trial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let trial: Vec<f64> = trial.iter().map(|v| (v - top).max(-690.0)).collect();
            let (v, pr) = value_of(&trial)?;
            if v >= value * (1.0 - 1e-15) {
                accepted = Some((trial, v, pr));
                break;
            }
            eta *= 0.5;
        }
        let Some((next, v, pr)) = accepted else {
            return Ok(dual_solution(start, &lg, value, it, true));
        };
        let change = (v - value).abs() / value;
        lg = next;
        value = v;
        parts = pr;
        eta = (2.0 * eta).min(1.0);
        quiet = if change < STOP_CHANGE { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(dual_solution(start, &lg, value, it, true));
        }
    }
    Ok(dual_solution(start, &lg, value, MAX_ITERATIONS, false))
}

fn dual_solution(start: &GridFunction, lg: &[f64], value: f64, iterations: usize, converged: bool) -> Solution {
    let function = start.with_values(lg.iter().map(|v| v.exp()).collect());
    Solution {
        function,
        value,
        iterations,
        converged,
    }
}

/// Symmetry parameters of the closest member of an optimizer family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryFit {
    pub lambda: f64,
    pub mu: f64,
    pub x0: f64,
    /// ‖f − λ base(µ(x − x₀))‖₂ / ‖f‖₂ in the grid quadrature.
    pub rel_l2: f64,
}

fn fit_residual(f: &GridFunction, base: &dyn Fn(f64) -> f64, mu: f64, x0: f64) -> (f64, f64) {
    let w = f.grid.weights();
    let phi: Vec<f64> = f.nodes().iter().map(|&x| base(mu * (x - x0))).collect();
    let mut fp = 0.0;
    let mut pp = 0.0;
    let mut ff = 0.0;
    for i in 0..phi.len() {
        fp += w[i] * f.values[i] * phi[i];
        pp += w[i] * phi[i] * phi[i];
        ff += w[i] * f.values[i] * f.values[i];
    }
    let lambda = if pp > 0.0 { fp / pp } else { 0.0 };
    let r2: f64 = (0..phi.len()).map(|i| w[i] * (f.values[i] - lambda * phi[i]).powi(2)).sum();
    (lambda, (r2.max(0.0) / ff).sqrt())
}

/// Least-squares fit of λ·base(µ(x − x₀)) to f. λ is eliminated in closed
/// form; (µ, x₀) are refined by alternating golden-section searches started
/// from the moments of f².
pub fn fit_symmetries(f: &GridFunction, base: &dyn Fn(f64) -> f64, base_spread: f64) -> SymmetryFit {
    let w = f.grid.weights();
    let x = f.nodes();
    let m0: f64 = (0..x.len()).map(|i| w[i] * f.values[i] * f.values[i]).sum();
    let m1: f64 = (0..x.len()).map(|i| w[i] * x[i] * f.values[i] * f.values[i]).sum();
    let mut x0 = m1 / m0;
    let m2: f64 = (0..x.len()).map(|i| w[i] * (x[i] - x0).powi(2) * f.values[i] * f.values[i]).sum();
    let mut mu = base_spread / (m2 / m0).sqrt();
    let obj = |mu: f64, x0: f64| fit_residual(f, base, mu, x0).1;
    let mut width = 0.2;
    for _ in 0..12 {
        mu = golden(|s| obj(mu * s.exp(), x0), -width, width).map(|s| mu * s.exp()).unwrap_or(mu);
        let span = width / mu;
        x0 = golden(|s| obj(mu, x0 + s), -span, span).map(|s| x0 + s).unwrap_or(x0);
        width *= 0.5;
    }
    let (lambda, rel_l2) = fit_residual(f, base, mu, x0);
    SymmetryFit { lambda, mu, x0, rel_l2 }
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f0 = f(0.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (f(s) < f0).then_some(s)
}

/// Fit of a primal iterate to λ f⋆(µ(x − x₀)) (p > 2) or λ f∗(µ(x − x₀)).
pub fn fit_primal(f: &GridFunction, gp: &GNParams) -> SymmetryFit {
    let o = Optimizer::primal(gp);
    let base = move |x: f64| o.eval_at(x);
    fit_symmetries(f, &base, primal_spread(gp))
}

/// Fit of a dual iterate to λ(1 + µ²y²)^{−q_dual}.
pub fn fit_dual(g: &GridFunction, gp: &GNParams) -> SymmetryFit {
    let q = gp.q_dual;
    let root: Vec<f64> = g.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let rg = g.with_values(root);
    // fit √G to (1 + y²)^{−q/2}, square the amplitude afterwards
    let base = move |y: f64| (-0.5 * q * (y * y).ln_1p()).exp();
    let fit = fit_symmetries(&rg, &base, (1.0 / (2.0 * q - 3.0)).sqrt());
    SymmetryFit {
        lambda: fit.lambda * fit.lambda,
        ..fit
    }
}

/// Standard deviation of x under f⋆² / f∗² normalized.
fn primal_spread(gp: &GNParams) -> f64 {
    let o = Optimizer::primal(gp);
    let (lo, hi) = if gp.is_super() { (-40.0, 40.0) } else { (-1.6, 1.6) };
    let n = 8001;
    let h = (hi - lo) / (n - 1) as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..n {
        let x = lo + h * i as f64;
        let v = o.eval_at(x).powi(2);
        a += v;
        b += v * x * x;
    }
    (b / a).sqrt()
}

/// Closed-form dual quotient along the family (1 + y²)^{−s}.
pub fn dual_family_value(gp: &GNParams, s: f64) -> Result<f64> {
    let (m, _, _) = gp.dual_exponents();
    if !(s > 1.5 && m * s > 0.5) {
        return Err(Error::InvalidParams(format!("(1+y²)^(−{s}) lacks a finite second moment or ∫G^m")));
    }
    let h = h_of_q(s)?;
    dual_from_moments(h_of_q(m * s)?, h / (2.0 * s - 3.0), h, gp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParametricDual {
    pub exponent: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Ascent restricted to G = (a + b y²)^{−s}. The quotient does not depend on
/// (a, b), so the search runs over s alone, by golden section with closed-form
/// moments.
pub fn parametric_dual(gp: &GNParams) -> Result<ParametricDual> {
    let (m, _, _) = gp.dual_exponents();
    let lo = 1.5f64.max(0.5 / m) + 1e-9;
    let (mut a, mut b) = (lo, lo + 8.0 * gp.q_dual);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let val = |s: f64| dual_family_value(gp, s).unwrap_or(0.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (val(c), val(d));
    let mut evaluations = 2;
    while b - a > 1e-9 * b {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = val(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = val(d);
        }
        evaluations += 1;
    }
    let s = 0.5 * (a + b);
    Ok(ParametricDual {
        exponent: s,
        value: dual_family_value(gp, s)?,
        evaluations: evaluations + 1,
    })
}

/// C₁(p) or C₂(p) and c_p.
pub fn closed_form_pair(gp: &GNParams) -> Result<(f64, f64)> {
    let t = constants_for(gp)?;
    Ok((t.c1_or_c2, t.c_p))
}
