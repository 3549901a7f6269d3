//! Lyapunov functionals, the two GNS quotients, the generalized entropy and
//! the action functional, evaluated by grid quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{constants_for, GNParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionalName {
    LyapunovLine,
    LyapunovUltra,
    PrimalQuotient,
    DualQuotient,
    Entropy1,
    Action,
    GFunctional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub name: FunctionalName,
    pub value: f64,
    pub breakdown: Vec<(&'static str, f64)>,
}

impl FunctionalValue {
    pub fn part(&self, key: &str) -> Option<f64> {
        self.breakdown.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

fn int_of(f: &GridFunction, g: impl Fn(f64, f64, f64) -> f64) -> Result<f64> {
    let d = f.derivative(1)?;
    let vals: Vec<f64> = f
        .values
        .iter()
        .zip(&d.values)
        .zip(f.nodes())
        .map(|((&v, &dv), &x)| g(x, v, dv))
        .collect();
    Ok(f.grid.integrate_values(&vals))
}

/// (∫|f|^p)^{2/p} through logarithms.
fn pnorm_sq(lp: f64, p: f64) -> f64 {
    if lp <= 0.0 {
        0.0
    } else {
        (2.0 / p * lp.ln()).exp()
    }
}

/// The constant 𝖢 of the line functional, fixed so that F[v⋆] = 0.
pub fn line_constant(gp: &GNParams) -> Result<f64> {
    let zeta = constants_for(gp)?.zeta_p;
    Ok(gp.threshold() * zeta.powf(1.0 - 2.0 / gp.p))
}

/// The line functional: ‖v′‖² + 4/(p−2)²‖v‖² − 𝖢‖v‖_p² for p > 2, and
/// ‖v′‖² + 𝖢‖v‖_p² − 4/(2−p)²‖v‖² for p < 2.
pub fn lyapunov_line(v: &GridFunction, gp: &GNParams) -> Result<FunctionalValue> {
    let p = gp.p;
    let grad = int_of(v, |_, _, d| d * d)?;
    let l2 = v.grid.integrate_values(&v.values.iter().map(|x| x * x).collect::<Vec<_>>());
    let lp = v.grid.integrate_values(&v.values.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    let c = line_constant(gp)?;
    let k = 4.0 / ((p - 2.0) * (p - 2.0));
    let np = pnorm_sq(lp, p);
    let value = match gp.regime {
        Regime::Supercritical => grad + k * l2 - c * np,
        Regime::Subcritical => grad + c * np - k * l2,
    };
    Ok(FunctionalValue {
        name: FunctionalName::LyapunovLine,
        value,
        breakdown: vec![("gradient", grad), ("l2", l2), ("lp", lp), ("constant", c)],
    })
}

/// Weight ν = 1 − z² or ξ = 1 + y² of the ultraspherical Dirichlet form.
pub fn ultra_weight(gp: &GNParams, x: f64) -> f64 {
    match gp.regime {
        Regime::Supercritical => 1.0 - x * x,
        Regime::Subcritical => 1.0 + x * x,
    }
}

fn require_ultra(f: &GridFunction, gp: &GNParams) -> Result<()> {
    match (f.grid.measure(), gp.regime) {
        (Measure::NuP { p }, Regime::Supercritical) | (Measure::XiP { p }, Regime::Subcritical) if p == gp.p => Ok(()),
        (m, _) => Err(Error::DomainMismatch(format!(
            "ultraspherical functional at p = {} needs its own probability grid, got {m:?}",
            gp.p
        ))),
    }
}

/// 𝖥[f] = ∫|f′|²ν + T(∫f² − (∫f^p)^{2/p}) for p > 2 and
/// ∫|f′|²ξ + T((∫f^p)^{2/p} − ∫f²) for p < 2, with T = 2p/(p−2)².
pub fn lyapunov_ultra(f: &GridFunction, gp: &GNParams) -> Result<FunctionalValue> {
    require_ultra(f, gp)?;
    let p = gp.p;
    let grad = int_of(f, |x, _, d| d * d * ultra_weight(gp, x))?;
    let l2 = f.grid.integrate_values(&f.values.iter().map(|x| x * x).collect::<Vec<_>>());
    let lp = f.grid.integrate_values(&f.values.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    let t = gp.threshold();
    let np = pnorm_sq(lp, p);
    let value = match gp.regime {
        Regime::Supercritical => grad + t * (l2 - np),
        Regime::Subcritical => grad + t * (np - l2),
    };
    Ok(FunctionalValue {
        name: FunctionalName::LyapunovUltra,
        value,
        breakdown: vec![("gradient", grad), ("l2", l2), ("lp", lp)],
    })
}

/// Right-hand side of the duality theorem:
/// ‖f′‖^{2(p−2)/(3p−2)} ‖f‖₂^{2(p+2)/(3p−2)} / ‖f‖_p^{4p/(3p−2)} for p > 2 and
/// ‖f′‖^{(2−p)/(4−p)} ‖f‖_p^{2p/(4−p)} / ‖f‖₂^{(p+2)/(4−p)} for p < 2.
pub fn primal_quotient(f: &GridFunction, gp: &GNParams) -> Result<FunctionalValue> {
    let d = f.derivative(1)?;
    let p = gp.p;
    let grad = f.grid.integrate_values(&d.values.iter().map(|x| x * x).collect::<Vec<_>>());
    let l2 = f.grid.integrate_values(&f.values.iter().map(|x| x * x).collect::<Vec<_>>());
    let lp = f.grid.integrate_values(&f.values.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    let value = primal_from_norms(grad, l2, lp, gp)?;
    Ok(FunctionalValue {
        name: FunctionalName::PrimalQuotient,
        value,
        breakdown: vec![("gradient", grad), ("l2", l2), ("lp", lp)],
    })
}

/// The primal quotient expressed through ∫|f′|², ∫f², ∫|f|^p.
pub fn primal_from_norms(grad: f64, l2: f64, lp: f64, gp: &GNParams) -> Result<f64> {
    if !(grad > 0.0 && l2 > 0.0 && lp > 0.0) {
        return Err(Error::DivisionByZero("primal_quotient"));
    }
    let p = gp.p;
    let (lg, l2n, lpn) = (0.5 * grad.ln(), 0.5 * l2.ln(), lp.ln() / p);
    let ln = match gp.regime {
        Regime::Supercritical => {
            let s = 3.0 * p - 2.0;
            2.0 * (p - 2.0) / s * lg + 2.0 * (p + 2.0) / s * l2n - 4.0 * p / s * lpn
        }
        Regime::Subcritical => {
            let s = 4.0 - p;
            (2.0 - p) / s * lg + 2.0 * p / s * lpn - (p + 2.0) / s * l2n
        }
    };
    Ok(ln.exp())
}

/// Left-hand side of the duality theorem: ∫G^m / ((∫G|y|²)^a (∫G)^b).
pub fn dual_quotient(g: &GridFunction, gp: &GNParams) -> Result<FunctionalValue> {
    let (m, _, _) = gp.dual_exponents();
    let gm = g.grid.integrate_values(&g.values.iter().map(|x| x.max(0.0).powf(m)).collect::<Vec<_>>());
    let mom = g.grid.integrate_values(&g.values.iter().zip(g.nodes()).map(|(v, y)| v * y * y).collect::<Vec<_>>());
    let mass = g.integrate();
    let value = dual_from_moments(gm, mom, mass, gp)?;
    Ok(FunctionalValue {
        name: FunctionalName::DualQuotient,
        value,
        breakdown: vec![("g_pow_m", gm), ("second_moment", mom), ("mass", mass)],
    })
}

pub fn dual_from_moments(gm: f64, mom: f64, mass: f64, gp: &GNParams) -> Result<f64> {
    if !(gm > 0.0 && mom > 0.0 && mass > 0.0) {
        return Err(Error::DivisionByZero("dual_quotient"));
    }
    let (_, a, b) = gp.dual_exponents();
    Ok((gm.ln() - a * mom.ln() - b * mass.ln()).exp())
}

/// F₁[G] = (m−1)^{−1}∫G^m + ½∫G|y|².
pub fn entropy_f1(g: &GridFunction, m: f64) -> Result<FunctionalValue> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParams(format!("m = {m} must lie in (0,1)")));
    }
    let (a, b) = entropy_parts(g, m);
    Ok(FunctionalValue {
        name: FunctionalName::Entropy1,
        value: a / (m - 1.0) + 0.5 * b,
        breakdown: vec![("g_pow_m", a), ("second_moment", b)],
    })
}

fn entropy_parts(g: &GridFunction, m: f64) -> (f64, f64) {
    let a = g.grid.integrate_values(&g.values.iter().map(|x| x.max(0.0).powf(m)).collect::<Vec<_>>());
    let b = g.grid.integrate_values(&g.values.iter().zip(g.nodes()).map(|(v, y)| v * y * y).collect::<Vec<_>>());
    (a, b)
}

/// min over λ of F₁[λG(λ·)] = (½ − 1/(1−m)) A^{2/(1+m)} B^{−(1−m)/(1+m)}
/// with A = ∫G^m, B = ∫G|y|², and the minimizing λ* = (B/A)^{1/(1+m)}.
pub fn f1_scaling_optimum(g: &GridFunction, m: f64) -> Result<(f64, f64)> {
    let (a, b) = entropy_parts(g, m);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::DivisionByZero("f1_scaling_optimum"));
    }
    let value = (0.5 - 1.0 / (1.0 - m)) * (2.0 / (1.0 + m) * a.ln() - (1.0 - m) / (1.0 + m) * b.ln()).exp();
    Ok((value, (b / a).powf(1.0 / (1.0 + m))))
}

/// A_α[ρ, w] = ∫|w|² ρ^{−α}.
pub fn action(rho: &GridFunction, w: &GridFunction, alpha: f64) -> Result<FunctionalValue> {
    if rho.values.len() != w.values.len() {
        return Err(Error::InvalidParams("ρ and w sampled on different grids".into()));
    }
    if rho.values.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("action", "ρ must be positive"));
    }
    let vals: Vec<f64> = rho
        .values
        .iter()
        .zip(&w.values)
        .map(|(&r, &v)| action_density(r, v, alpha))
        .collect();
    let value = rho.grid.integrate_values(&vals);
    Ok(FunctionalValue {
        name: FunctionalName::Action,
        value,
        breakdown: vec![("alpha", alpha)],
    })
}

pub fn action_density(rho: f64, w: f64, alpha: f64) -> f64 {
    w * w * (-alpha * rho.ln()).exp()
}

/// A sampled counterexample to joint convexity of (ρ, w) ↦ |w|²ρ^{−α}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityWitness {
    pub first: (f64, f64),
    pub second: (f64, f64),
    pub t: f64,
    /// A at the combination minus the combination of the A's (> 0).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityProbe {
    pub alpha: f64,
    pub samples: usize,
    pub passed: bool,
    pub witness: Option<ConvexityWitness>,
}

/// Samples random pairs (ρ₁, w₁), (ρ₂, w₂) and t ∈ (0,1). The first pair is
/// drawn log-uniformly, the second as a perturbation of it of random size,
/// so both global and local non-convexity are probed.
pub fn convexity_probe(alpha: f64, samples: usize, seed: u64) -> ConvexityProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<ConvexityWitness> = None;
    let mut worst_ratio = 0.0;
    for _ in 0..samples {
        let r1 = (rng.gen_range(-3.0f64..3.0)).exp();
        let w1 = rng.gen_range(-3.0..3.0);
        let scale = (rng.gen_range(-6.0f64..0.5)).exp();
        let r2 = r1 * (scale * rng.gen_range(-1.0..1.0f64)).exp();
        let w2 = w1 + scale * rng.gen_range(-3.0..3.0);
        let t: f64 = rng.gen_range(0.05..0.95);
        let rc = t * r1 + (1.0 - t) * r2;
        let wc = t * w1 + (1.0 - t) * w2;
        let lhs = action_density(rc, wc, alpha);
        let rhs = t * action_density(r1, w1, alpha) + (1.0 - t) * action_density(r2, w2, alpha);
        let excess = lhs - rhs;
        let ratio = excess / rhs.abs().max(1e-300);
        if ratio > 1e-12 && ratio > worst_ratio {
            worst_ratio = ratio;
            worst = Some(ConvexityWitness {
                first: (r1, w1),
                second: (r2, w2),
                t,
                excess,
            });
        }
    }
    ConvexityProbe {
        alpha,
        samples,
        passed: worst.is_none(),
        witness: worst,
    }
}

/// 𝒢[f] = ∫|f′|² + ∫|f|^p − C(∫f²)^{(p+2)/(6−p)}.
pub fn g_functional(f: &GridFunction, gp: &GNParams, c: f64) -> Result<FunctionalValue> {
    let p = gp.p;
    let grad = int_of(f, |_, _, d| d * d)?;
    let l2 = f.grid.integrate_values(&f.values.iter().map(|x| x * x).collect::<Vec<_>>());
    let lp = f.grid.integrate_values(&f.values.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    Ok(FunctionalValue {
        name: FunctionalName::GFunctional,
        value: grad + lp - c * l2.powf((p + 2.0) / (6.0 - p)),
        breakdown: vec![("gradient", grad), ("l2", l2), ("lp", lp)],
    })
}
