//! Closed-form optimizers, Euler-Lagrange residuals, the first integral E[f]
//! and the changes of variables between line, interval and ultraspherical
//! pictures.

pub mod shooting;
pub mod transform;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::constants::{GNParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Measure, WeightedGrid};
use crate::special::h_of_q;

pub use shooting::{shooting_solve, ShootingOutcome, ShootingResult};
pub use transform::{transform, Direction, TransformKind, TransformSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimizerKind {
    /// (cosh x)^{−2/(p−2)}
    FStarLine,
    /// (cos x)^{2/(2−p)} on [−π/2, π/2], zero outside
    FStarCompact,
    /// (1 + y²)^{−q}
    GBarenblattDual,
    /// (C + ((1−m)/(2m)) y²)^{1/(m−1)} with C fixed by the mass
    BarenblattFD,
    /// M e^{−y²/(2σ²)} / √(2πσ²)
    Gaussian,
}

/// A closed-form profile x ↦ λ·base(µ(x − x₀)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    /// p for the optimizers, q for the dual profile, m for fast diffusion,
    /// σ² for the Gaussian.
    pub shape: f64,
    pub lambda: f64,
    pub mu: f64,
    pub x0: f64,
    pub mass: f64,
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Optimizer {
    fn unit(kind: OptimizerKind, shape: f64, mass: f64) -> Self {
        Optimizer {
            kind,
            shape,
            lambda: 1.0,
            mu: 1.0,
            x0: 0.0,
            mass,
        }
    }

    /// f⋆ for p > 2, f∗ for p < 2.
    pub fn primal(gp: &GNParams) -> Self {
        match gp.regime {
            Regime::Supercritical => Self::unit(OptimizerKind::FStarLine, gp.p, f64::NAN),
            Regime::Subcritical => Self::unit(OptimizerKind::FStarCompact, gp.p, f64::NAN),
        }
    }

    /// G = (1 + y²)^{−q_dual}.
    pub fn dual(gp: &GNParams) -> Self {
        Self::unit(OptimizerKind::GBarenblattDual, gp.q_dual, f64::NAN)
    }

    pub fn barenblatt_fd(m: f64, mass: f64) -> Result<Self> {
        if !(m > 1.0 / 3.0 && m < 1.0) {
            return Err(Error::InvalidParams(format!(
                "Barenblatt exponent m = {m} must lie in (1/3, 1) for a finite second moment"
            )));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidParams("mass must be positive".into()));
        }
        Ok(Self::unit(OptimizerKind::BarenblattFD, m, mass))
    }

    pub fn gaussian(variance: f64, mass: f64) -> Self {
        Self::unit(OptimizerKind::Gaussian, variance, mass)
    }

    pub fn scaled(self, lambda: f64, mu: f64, x0: f64) -> Self {
        Optimizer {
            lambda,
            mu,
            x0,
            ..self
        }
    }

    /// The constant C of the Barenblatt profile with the requested mass.
    pub fn barenblatt_constant(m: f64, mass: f64) -> Result<f64> {
        let k = 1.0 / (1.0 - m);
        let a = (1.0 - m) / (2.0 * m);
        let h = h_of_q(k)?;
        // M = C^{1/2−k} a^{−1/2} h(k)
        Ok(((mass * a.sqrt() / h).ln() / (0.5 - k)).exp())
    }

    fn base(&self, x: f64) -> f64 {
        match self.kind {
            OptimizerKind::FStarLine => (-2.0 / (self.shape - 2.0) * ln_cosh(x)).exp(),
            OptimizerKind::FStarCompact => {
                if x.abs() >= PI / 2.0 {
                    0.0
                } else {
                    x.cos().powf(2.0 / (2.0 - self.shape))
                }
            }
            OptimizerKind::GBarenblattDual => (-self.shape * (x * x).ln_1p()).exp(),
            OptimizerKind::BarenblattFD => {
                let m = self.shape;
                let c = Self::barenblatt_constant(m, self.mass).unwrap_or(f64::NAN);
                (c + (1.0 - m) / (2.0 * m) * x * x).powf(1.0 / (m - 1.0))
            }
            OptimizerKind::Gaussian => {
                let s2 = self.shape;
                self.mass * (-x * x / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
            }
        }
    }

    pub fn eval_at(&self, x: f64) -> f64 {
        self.lambda * self.base(self.mu * (x - self.x0))
    }

    pub fn strictly_positive(&self) -> bool {
        !matches!(self.kind, OptimizerKind::FStarCompact) && self.lambda > 0.0
    }
}

/// Samples an optimizer on a Lebesgue grid.
pub fn eval_optimizer(o: &Optimizer, grid: &Arc<WeightedGrid>) -> Result<GridFunction> {
    if !matches!(grid.measure(), Measure::Lebesgue { .. }) {
        return Err(Error::DomainMismatch(format!(
            "{:?} lives on the line; grid carries {:?}",
            o.kind,
            grid.measure()
        )));
    }
    let values = grid.nodes().iter().map(|&x| o.eval_at(x)).collect();
    let mut f = GridFunction::new(grid.clone(), values, false)?;
    f.strictly_positive = o.strictly_positive() && f.values.iter().all(|&v| v > 0.0);
    Ok(f)
}

/// Pointwise residual of −(p−2)²f″ + 4f − 2p|f|^{p−2}f (p > 2) or
/// −(2−p)²f″ − 4f + 2p|f|^{p−2}f (p < 2).
pub fn el_residual(f: &GridFunction, gp: &GNParams) -> Result<GridFunction> {
    let p = gp.p;
    let f2 = f.derivative(2)?;
    let s = (p - 2.0) * (p - 2.0);
    let sign = if gp.is_super() { 1.0 } else { -1.0 };
    let values = f
        .values
        .iter()
        .zip(&f2.values)
        .map(|(&v, &d2)| -s * d2 + sign * 4.0 * v - sign * 2.0 * p * v.abs().powf(p - 2.0) * v)
        .collect();
    Ok(f.with_values(values))
}

/// First integral of the Euler-Lagrange equation, constant in x along every
/// solution: ½(p−2)²|f′|² − 2|f|² + 2|f|^p for p > 2 and
/// ½(2−p)²|f′|² + 2|f|² − 2|f|^p for p < 2. Both vanish on the optimizers.
pub fn energy_invariant(f: &GridFunction, gp: &GNParams) -> Result<GridFunction> {
    let d1 = f.derivative(1)?;
    let values = f
        .values
        .iter()
        .zip(&d1.values)
        .map(|(&v, &d)| energy_density(v, d, gp))
        .collect();
    Ok(f.with_values(values))
}

pub fn energy_density(f: f64, df: f64, gp: &GNParams) -> f64 {
    let p = gp.p;
    let kinetic = 0.5 * (p - 2.0) * (p - 2.0) * df * df;
    let pot = 2.0 * f * f - 2.0 * f.abs().powf(p);
    if gp.is_super() {
        kinetic - pot
    } else {
        kinetic + pot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let g4 = GNParams::new(4.0).unwrap();
        assert_eq!(Optimizer::primal(&g4).eval_at(0.0), 1.0);
        let g = GNParams::new(1.5).unwrap();
        let o = Optimizer::primal(&g);
        assert_eq!(o.eval_at(PI / 2.0), 0.0);
        assert_eq!(o.eval_at(-PI / 2.0), 0.0);
        assert!(o.eval_at(PI / 2.0 - 1e-3) < 1e-11);
    }

    #[test]
    fn constant_residual() {
        let g4 = GNParams::new(4.0).unwrap();
        let grid = Arc::new(WeightedGrid::uniform(-1.0, 1.0, 17).unwrap());
        let one = GridFunction::from_fn(&grid, |_| 1.0);
        let r = el_residual(&one, &g4).unwrap();
        assert!(r.values.iter().all(|v| (v + 4.0).abs() < 1e-10));
    }

    #[test]
    fn rejects_non_line_grid() {
        let g4 = GNParams::new(4.0).unwrap();
        let grid = Arc::new(WeightedGrid::nu_p(&g4, 32).unwrap());
        assert!(matches!(
            eval_optimizer(&Optimizer::primal(&g4), &grid),
            Err(Error::DomainMismatch(_))
        ));
    }
}
