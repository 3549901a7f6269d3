//! Quadrature checks of the two integration-by-parts identities for
//! 𝖫_ab f = ν^a f″ + ((a+b)/a)(ν^a)′ f′ on L²(ν^b dx), and the rigidity
//! solver for −𝖫f ± λf = ±f^{p−1}.

pub mod rigidity;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Measure, NuKind, WeightedGrid};

pub use rigidity::{
    constant_solution, continue_branch, lambda_scan, perturbed_constant, rigidity_identity_check, rigidity_multistart, rigidity_solve, RigidityClass, RigidityIdentity,
    RigidityResult, ScanRow,
};

#[derive(Debug, Clone)]
pub struct AbOperatorSpec {
    pub a: f64,
    pub b: f64,
    pub nu: NuKind,
    /// Quadrature for the unnormalised measure dµ_b = ν^b dx.
    pub grid: Arc<WeightedGrid>,
}

impl AbOperatorSpec {
    pub fn new(a: f64, b: f64, nu: NuKind, grid: Arc<WeightedGrid>) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParams(format!("need a ≠ 0 and finite b, got a = {a}, b = {b}")));
        }
        match grid.measure() {
            Measure::NuPower { nu: gnu, b: gb } if gnu == nu && (gb - b).abs() <= 1e-14 * b.abs().max(1.0) => {}
            m => {
                return Err(Error::DomainMismatch(format!(
                    "grid carries {m:?}, expected ν^b dx with ν = {nu:?}, b = {b}"
                )))
            }
        }
        Ok(AbOperatorSpec { a, b, nu, grid })
    }

    /// Uniform Simpson grid for ν^b dx on [lo, hi].
    pub fn on_interval(a: f64, b: f64, nu: NuKind, lo: f64, hi: f64, n: usize) -> Result<Self> {
        // the closed interval is allowed where ν^a and ν^b stay bounded
        let closed_ok = a == 1.0 && b >= 0.0;
        if nu == NuKind::OneMinusZ2 && !((lo > -1.0 && hi < 1.0) || (closed_ok && lo >= -1.0 && hi <= 1.0)) {
            return Err(Error::InvalidParams("the interval must lie inside (−1, 1)".into()));
        }
        let grid = Arc::new(WeightedGrid::weighted_uniform(nu, b, lo, hi, n)?);
        Self::new(a, b, nu, grid)
    }

    fn nu_a(&self, x: f64) -> (f64, f64, f64) {
        let (n0, n1, n2) = (self.nu.eval(x), self.nu.d1(x), self.nu.d2());
        let a = self.a;
        if a == 1.0 {
            return (n0, n1, n2);
        }
        let v = n0.powf(a);
        let d1 = a * n0.powf(a - 1.0) * n1;
        let d2 = a * (a - 1.0) * n0.powf(a - 2.0) * n1 * n1 + a * n0.powf(a - 1.0) * n2;
        (v, d1, d2)
    }

    /// Coefficient (a+b)/a of the curvature term in the first identity.
    pub fn first_coefficient(&self) -> f64 {
        (self.a + self.b) / self.a
    }

    /// ((a+b)/(2a+b), (a+2b)/(2a+b)) of the second identity.
    pub fn second_coefficients(&self) -> Result<(f64, f64)> {
        let den = 2.0 * self.a + self.b;
        if den == 0.0 {
            return Err(Error::DivisionByZero("2a + b"));
        }
        Ok(((self.a + self.b) / den, (self.a + 2.0 * self.b) / den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub mismatch: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        IdentityCheck {
            lhs,
            rhs,
            mismatch: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-14),
        }
    }
}

/// (1 − s²)⁴ with s the position relative to [lo, hi], zero outside.
pub fn taper(lo: f64, hi: f64, x: f64) -> f64 {
    let s = (2.0 * x - lo - hi) / (hi - lo);
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(4)
    }
}

/// c + taper·g on the spec's grid: positive when c > sup|g|, with every
/// derivative vanishing to high order at both ends.
pub fn tapered(spec: &AbOperatorSpec, c: f64, g: impl Fn(f64) -> f64) -> GridFunction {
    let nodes = spec.grid.nodes();
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    GridFunction::from_fn(&spec.grid, |x| c + taper(lo, hi, x) * g(x))
}

/// c + taper·(random degree-6 polynomial in the rescaled variable) with
/// c ∈ [7.5, 9.5), which keeps u positive.
pub fn random_tapered(spec: &AbOperatorSpec, rng: &mut ChaCha8Rng) -> GridFunction {
    let coeffs: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nodes = spec.grid.nodes();
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    let poly = move |x: f64| {
        let s = (2.0 * x - lo - hi) / (hi - lo);
        coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    };
    let c = 7.5 + rng.gen_range(0.0..2.0);
    tapered(spec, c, poly)
}

fn check_grid(u: &GridFunction, spec: &AbOperatorSpec) -> Result<()> {
    if !Arc::ptr_eq(&u.grid, &spec.grid) && u.grid.nodes() != spec.grid.nodes() {
        return Err(Error::DomainMismatch("u lives on another grid".into()));
    }
    Ok(())
}

/// 𝖫_ab u at the nodes.
pub fn ab_operator(u: &GridFunction, spec: &AbOperatorSpec) -> Result<Vec<f64>> {
    check_grid(u, spec)?;
    let d1 = u.grid.diff(&u.values, 1)?;
    let d2 = u.grid.diff(&u.values, 2)?;
    let k = spec.first_coefficient();
    Ok(u
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (v, dv, _) = spec.nu_a(x);
            v * d2[i] + k * dv * d1[i]
        })
        .collect())
}

/// ∫(𝖫u)² dµ_b against ∫|u″|² dµ_{2a+b} − ((a+b)/a)∫ν^a(ν^a)″|u′|² dµ_b.
pub fn verify_identity_1(u: &GridFunction, spec: &AbOperatorSpec) -> Result<IdentityCheck> {
    let l = ab_operator(u, spec)?;
    let d1 = u.grid.diff(&u.values, 1)?;
    let d2 = u.grid.diff(&u.values, 2)?;
    let k = spec.first_coefficient();
    let nodes = u.nodes();
    let lhs = spec.grid.integrate_values(&l.iter().map(|x| x * x).collect::<Vec<_>>());
    let rhs_vals: Vec<f64> = (0..nodes.len())
        .map(|i| {
            let (v, _, ddv) = spec.nu_a(nodes[i]);
            v * v * d2[i] * d2[i] - k * v * ddv * d1[i] * d1[i]
        })
        .collect();
    Ok(IdentityCheck::new(lhs, spec.grid.integrate_values(&rhs_vals)))
}

/// ∫(𝖫u)(|u′|²/u)ν^a dµ_b against
/// ((a+b)/(2a+b))∫|u′|⁴/u² ν^{2a} dµ_b − ((a+2b)/(2a+b))∫u″|u′|²/u ν^{2a} dµ_b.
pub fn verify_identity_2(u: &GridFunction, spec: &AbOperatorSpec) -> Result<IdentityCheck> {
    if u.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("verify_identity_2", "u must be strictly positive"));
    }
    let (c4, c2) = spec.second_coefficients()?;
    let l = ab_operator(u, spec)?;
    let d1 = u.grid.diff(&u.values, 1)?;
    let d2 = u.grid.diff(&u.values, 2)?;
    let nodes = u.nodes();
    let mut lhs = vec![0.0; nodes.len()];
    let mut rhs = vec![0.0; nodes.len()];
    for i in 0..nodes.len() {
        let (v, _, _) = spec.nu_a(nodes[i]);
        let q = d1[i] * d1[i] / u.values[i];
        lhs[i] = l[i] * q * v;
        rhs[i] = (c4 * q * q - c2 * d2[i] * q) * v * v;
    }
    Ok(IdentityCheck::new(
        spec.grid.integrate_values(&lhs),
        spec.grid.integrate_values(&rhs),
    ))
}
