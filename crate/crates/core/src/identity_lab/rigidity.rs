//! Positive solutions of −𝖫f + λf = f^{p−1} (p > 2, on dν_p) and
//! −𝖫f − λf + f^{p−1} = 0 (1 < p < 2, on dξ_p).

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{GNParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal_pivoted, GridFunction, Measure, WeightedGrid};

const MAX_NEWTON: usize = 200;
const CONSTANT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RigidityClass {
    Constant,
    Nonconstant,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct RigidityResult {
    pub solution: GridFunction,
    pub class: RigidityClass,
    /// max |residual| of the discrete equation at exit.
    pub residual: f64,
    pub iterations: usize,
    /// ‖f − λ^{1/(p−2)}‖∞
    pub deviation: f64,
}

/// Finite-volume form of 𝖫 = ρ^{−1}(ρνf′)′ on the dν_p or dξ_p grid:
/// cell volumes of the probability measure and interface conductances, so
/// that the discrete operator is self-adjoint for Σ V_i f_i g_i.
struct FvOperator {
    volumes: Vec<f64>,
    kappa: Vec<f64>,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const K: usize = 16;
    let h = (b - a) / K as f64;
    let mut s = f(a) + f(b);
    for k in 1..K {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * k as f64);
    }
    s * h / 3.0
}

impl FvOperator {
    fn build(gp: &GNParams, grid: &WeightedGrid) -> Self {
        let n = grid.len();
        let h = PI / n as f64;
        let nodes = grid.nodes();
        let (density, edge): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match gp.regime {
            // z = −cos θ: ν^b dz = sin^{2b+1}θ dθ with b = 2/(p−2)
            Regime::Supercritical => {
                let b = 2.0 / (gp.p - 2.0);
                (
                    Box::new(move |t: f64| t.sin().powf(2.0 * b + 1.0)),
                    Box::new(move |t: f64| t.sin().powf(2.0 * b + 2.0)),
                )
            }
            // y = tan x: ξ^b dy = cos^{2p/(2−p)}x dx and ξ^{b+1} = cos^{2p/(2−p)}x
            Regime::Subcritical => {
                let r = 2.0 * gp.p / (2.0 - gp.p);
                (
                    Box::new(move |x: f64| x.cos().powf(r)),
                    Box::new(move |x: f64| x.cos().powf(r)),
                )
            }
        };
        let offset = match gp.regime {
            Regime::Supercritical => 0.0,
            Regime::Subcritical => -PI / 2.0,
        };
        let mut volumes: Vec<f64> = (0..n)
            .map(|i| simpson(&density, offset + h * i as f64, offset + h * (i + 1) as f64))
            .collect();
        let total: f64 = volumes.iter().sum();
        volumes.iter_mut().for_each(|v| *v /= total);
        let kappa = (0..n - 1)
            .map(|i| edge(offset + h * (i + 1) as f64) / total / (nodes[i + 1] - nodes[i]))
            .collect();
        FvOperator { volumes, kappa }
    }

    /// (𝖫f)_i
    fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        for i in 0..n {
            let right = if i + 1 < n { self.kappa[i] * (f[i + 1] - f[i]) } else { 0.0 };
            let left = if i > 0 { self.kappa[i - 1] * (f[i] - f[i - 1]) } else { 0.0 };
            out[i] = (right - left) / self.volumes[i];
        }
    }
}

fn check_scope(gp: &GNParams, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("λ = {lambda} must be positive")));
    }
    if gp.is_super() && (gp.p - 6.0).abs() < 1e-12 {
        return Err(Error::InvalidParams(
            "p = 6 lies outside the rigidity statement (β = 4/(6−p) is undefined)".into(),
        ));
    }
    Ok(())
}

fn check_grid(gp: &GNParams, grid: &WeightedGrid) -> Result<()> {
    let ok = match grid.measure() {
        Measure::NuP { p } | Measure::XiP { p } => (p - gp.p).abs() < 1e-14,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "rigidity needs the dν_p / dξ_p grid of p = {}, got {:?}",
            gp.p,
            grid.measure()
        )))
    }
}

pub fn constant_solution(p: f64, lambda: f64) -> f64 {
    lambda.powf(1.0 / (p - 2.0))
}

/// Damped Newton on the finite-volume equation from `initial` (a positive
/// function on `WeightedGrid::ultraspherical(gp, n)`).
pub fn rigidity_solve(gp: &GNParams, lambda: f64, initial: &GridFunction) -> Result<RigidityResult> {
    check_scope(gp, lambda)?;
    check_grid(gp, &initial.grid)?;
    if initial.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("rigidity_solve", "initial guess must be positive"));
    }
    let p = gp.p;
    let sign = if gp.is_super() { 1.0 } else { -1.0 };
    let op = FvOperator::build(gp, &initial.grid);
    let n = initial.values.len();
    let c = constant_solution(p, lambda);
    let scale = c.max(c.powf(p - 1.0)).max(1.0);
    let residual = |f: &[f64], out: &mut [f64]| {
        op.apply(f, out);
        for i in 0..n {
            out[i] = sign * (-out[i] + lambda * f[i] - f[i].powf(p - 1.0));
        }
    };
    let merit = |r: &[f64]| r.iter().zip(&op.volumes).map(|(a, v)| v * a * a).sum::<f64>();
    let mut f = initial.values.clone();
    let mut r = vec![0.0; n];
    residual(&f, &mut r);
    let mut phi = merit(&r);
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..MAX_NEWTON {
        iterations = it;
        let rmax = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if rmax <= 1e-11 * scale {
            converged = true;
            break;
        }
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for i in 0..n {
            let v = op.volumes[i];
            if i > 0 {
                lo[i] = -sign * op.kappa[i - 1] / v;
            }
            if i + 1 < n {
                up[i] = -sign * op.kappa[i] / v;
            }
            let kl = if i > 0 { op.kappa[i - 1] } else { 0.0 };
            let kr = if i + 1 < n { op.kappa[i] } else { 0.0 };
            di[i] = sign * ((kl + kr) / v + lambda - (p - 1.0) * f[i].powf(p - 2.0));
        }
        let dx = solve_tridiagonal_pivoted(&lo, &di, &up, &r);
        if dx.iter().any(|x| !x.is_finite()) {
            break;
        }
        if dx.iter().zip(&f).all(|(d, v)| d.abs() <= 1e-14 * v) {
            converged = rmax <= 1e-8 * scale;
            break;
        }
        let mut step = 1.0;
        let mut trial = vec![0.0; n];
        let mut rt = vec![0.0; n];
        let mut accepted = false;
        while step > 1e-10 {
            for i in 0..n {
                trial[i] = f[i] - step * dx[i];
            }
            if trial.iter().all(|&v| v > 0.0) {
                residual(&trial, &mut rt);
                let pt = merit(&rt);
                if pt <= (1.0 - 1e-4 * step) * phi || (pt < phi && step < 1e-3) {
                    accepted = true;
                    phi = pt;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // stagnation at rounding level of the conditioned system
            converged = r.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= 1e-8 * scale;
            break;
        }
        std::mem::swap(&mut f, &mut trial);
        std::mem::swap(&mut r, &mut rt);
    }
    let rmax = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let deviation = f.iter().fold(0.0f64, |m, v| m.max((v - c).abs()));
    let fmax = f.iter().cloned().fold(0.0, f64::max);
    let class = if !converged || fmax < 1e-8 * c {
        RigidityClass::Diverged
    } else if deviation <= CONSTANT_TOL {
        RigidityClass::Constant
    } else {
        RigidityClass::Nonconstant
    };
    Ok(RigidityResult {
        solution: initial.with_values(f),
        class,
        residual: rmax,
        iterations,
        deviation,
    })
}

/// Perturbed constants c(1 + ε g) with g a random polynomial of degree ≤ 4
/// in z (or in 2x/π with y = tan x), normalised to sup|g| = 1.
pub fn perturbed_constant(grid: &Arc<WeightedGrid>, c: f64, eps: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let comp = grid.comp_nodes();
    let s_of = |i: usize| match grid.measure() {
        Measure::XiP { .. } => 2.0 * comp[i] / PI,
        _ => comp[i],
    };
    let g: Vec<f64> = (0..grid.len())
        .map(|i| {
            let s = s_of(i);
            coeffs.iter().enumerate().map(|(k, a)| a * s.powi(k as i32 + 1)).sum()
        })
        .collect();
    let gmax = g.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
    let values = g.iter().map(|x| c * (1.0 + eps * x / gmax)).collect();
    GridFunction {
        grid: grid.clone(),
        values,
        strictly_positive: true,
    }
}

/// `starts` Newton solves from perturbed constants of amplitude in
/// [0.05, `amplitude`], seeded deterministically.
pub fn rigidity_multistart(
    gp: &GNParams,
    lambda: f64,
    n: usize,
    starts: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<RigidityResult>> {
    check_scope(gp, lambda)?;
    if !(amplitude > 0.0 && amplitude < 1.0) {
        return Err(Error::InvalidParams("perturbation amplitude must lie in (0, 1)".into()));
    }
    let grid = Arc::new(WeightedGrid::ultraspherical(gp, n)?);
    let c = constant_solution(gp.p, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<GridFunction> = (0..starts)
        .map(|_| {
            let eps = rng.gen_range(0.05f64.min(amplitude)..=amplitude);
            perturbed_constant(&grid, c, eps, &mut rng)
        })
        .collect();
    inits.par_iter().map(|f0| rigidity_solve(gp, lambda, f0)).collect()
}

/// Natural-parameter continuation: solves at each λ in turn, starting from
/// the previous solution. Stops after the first non-converged solve.
pub fn continue_branch(gp: &GNParams, start: &GridFunction, lambdas: &[f64]) -> Result<Vec<(f64, RigidityResult)>> {
    let mut out = Vec::with_capacity(lambdas.len());
    let mut f = start.clone();
    for &lambda in lambdas {
        let r = rigidity_solve(gp, lambda, &f)?;
        let stop = r.class == RigidityClass::Diverged;
        f = r.solution.clone();
        out.push((lambda, r));
        if stop {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidityIdentity {
    /// (2p/|p−2| ∓ λ(κ−1)/β) ∫|u′|²ν
    pub term1: f64,
    /// ∫|u″ − ((p+2)/(6−p))|u′|²/u|² ν²
    pub term2: f64,
    pub sum: f64,
    /// ∫(𝖫u + κ|u′|²ν/u) u^κ
    pub orthogonality: f64,
    pub coefficient: f64,
}

/// Evaluates both quadratures of the rigidity identity and the
/// orthogonality relation for u = f^{1/β}, β = 4/(6−p).
pub fn rigidity_identity_check(f: &GridFunction, gp: &GNParams, lambda: f64) -> Result<RigidityIdentity> {
    check_scope(gp, lambda)?;
    check_grid(gp, &f.grid)?;
    if f.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("rigidity_identity_check", "f must be positive"));
    }
    let p = gp.p;
    let beta = 4.0 / (6.0 - p);
    let kappa = beta * (p - 2.0) + 1.0;
    let grid = &f.grid;
    let u: Vec<f64> = f.values.iter().map(|v| v.powf(1.0 / beta)).collect();
    let d1 = grid.diff(&u, 1)?;
    let d2 = grid.diff(&u, 2)?;
    let drift = 2.0 * p / (p - 2.0).abs();
    let k = (p + 2.0) / (6.0 - p);
    let coefficient = match gp.regime {
        Regime::Supercritical => drift - lambda * (kappa - 1.0) / beta,
        Regime::Subcritical => drift + lambda * (kappa - 1.0) / beta,
    };
    let nodes = grid.nodes();
    let len = nodes.len();
    let (mut a, mut b, mut o) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for i in 0..len {
        let x = nodes[i];
        let (w, lu) = match gp.regime {
            Regime::Supercritical => (1.0 - x * x, (1.0 - x * x) * d2[i] - drift * x * d1[i]),
            Regime::Subcritical => (1.0 + x * x, (1.0 + x * x) * d2[i] - drift * x * d1[i]),
        };
        let g = d1[i] * d1[i] / u[i];
        a[i] = g * u[i] * w;
        let s = d2[i] - k * g;
        b[i] = s * s * w * w;
        o[i] = (lu + kappa * g * w) * u[i].powf(kappa);
    }
    let term1 = coefficient * grid.integrate_values(&a);
    let term2 = grid.integrate_values(&b);
    Ok(RigidityIdentity {
        term1,
        term2,
        sum: term1 + term2,
        orthogonality: grid.integrate_values(&o),
        coefficient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub constant: usize,
    pub nonconstant: usize,
    pub diverged: usize,
    pub max_deviation: f64,
    /// Smallest |sum| / (|term1| + |term2|) of the rigidity identity over the
    /// nonconstant solutions. Unresolved discrete bubbles leave it O(1).
    pub min_identity_residual: Option<f64>,
}

/// Multi-start solves on λ = 0.2·T, 0.2·T + step, …, 2·T with T the
/// threshold 2p/(p−2)².
pub fn lambda_scan(gp: &GNParams, n: usize, step: f64, starts: usize, seed: u64) -> Result<Vec<ScanRow>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParams("scan step must be positive".into()));
    }
    let t = gp.threshold();
    let count = ((1.8 * t) / step + 1e-9).floor() as usize + 1;
    let lambdas: Vec<f64> = (0..count).map(|k| 0.2 * t + step * k as f64).collect();
    lambdas
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let runs = rigidity_multistart(gp, lambda, n, starts, 0.3, seed.wrapping_add(k as u64))?;
            let mut row = ScanRow {
                lambda,
                constant: 0,
                nonconstant: 0,
                diverged: 0,
                max_deviation: 0.0,
                min_identity_residual: None,
            };
            for r in &runs {
                if r.class == RigidityClass::Nonconstant {
                    let id = rigidity_identity_check(&r.solution, gp, lambda)?;
                    let rel = id.sum.abs() / (id.term1.abs() + id.term2.abs()).max(1e-300);
                    row.min_identity_residual = Some(row.min_identity_residual.map_or(rel, |m: f64| m.min(rel)));
                }
                match r.class {
                    RigidityClass::Constant => row.constant += 1,
                    RigidityClass::Nonconstant => row.nonconstant += 1,
                    RigidityClass::Diverged => row.diverged += 1,
                }
                if r.class != RigidityClass::Diverged {
                    row.max_deviation = row.max_deviation.max(r.deviation);
                }
            }
            Ok(row)
        })
        .collect()
}
