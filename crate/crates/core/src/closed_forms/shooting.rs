//! Shooting for the Euler-Lagrange ODE from a maximum point f(0) = f₀,
//! f′(0) = 0.

use std::sync::Arc;

use serde::Serialize;

use super::energy_density;
use crate::constants::GNParams;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Integrator, StepControl, WeightedGrid};

pub const X_MAX: f64 = 15.0;
const BLOW_UP: f64 = 1e3;
const VANISH: f64 = 1e-12;
const TOUCH_DOWN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShootingOutcome {
    /// Positive and monotonically decreasing up to x_max.
    Decaying,
    /// Reaches zero tangentially and is continued by 0 (p < 2 only).
    CompactSupport,
    /// f′ changes sign: a positive periodic orbit.
    Oscillating,
    /// Crosses zero transversally.
    SignChange,
    BlowUp,
}

impl ShootingOutcome {
    pub fn decays(self) -> bool {
        matches!(self, ShootingOutcome::Decaying | ShootingOutcome::CompactSupport)
    }
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub outcome: ShootingOutcome,
    /// Even extension of the computed branch on [−x_stop, x_stop].
    pub solution: GridFunction,
    pub x_stop: f64,
    /// max |E(x) − E(0)| along the integrated branch.
    pub energy_drift: f64,
}

/// Integrates the regime's Euler-Lagrange equation outward from x = 0 and
/// classifies the branch. `n` is the node count of the symmetric output
/// grid on [−15, 15] (made odd so that 0 is a node).
pub fn shooting_solve(gp: &GNParams, f0: f64, n: usize) -> Result<ShootingResult> {
    if !(f0 > 0.0) {
        return Err(Error::InvalidParams(format!("f0 = {f0} must be positive")));
    }
    let half = (n.max(9) - 1) / 2;
    let h = X_MAX / half as f64;
    let p = gp.p;
    let s = (p - 2.0) * (p - 2.0);
    let sign = if gp.is_super() { 1.0 } else { -1.0 };
    let mut rhs = move |_x: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        let f = y[0];
        out[0] = y[1];
        out[1] = sign * (4.0 * f - 2.0 * p * f.abs().powf(p - 2.0) * f) / s;
        Ok(())
    };
    let ctl = StepControl {
        atol: 1e-14,
        rtol: 1e-13,
        dt_min: 1e-14,
        ..StepControl::default()
    };
    let mut it = Integrator::new(2, ctl, 1e-3, false);
    let e0 = energy_density(f0, 0.0, gp);
    let mut y = vec![f0, 0.0];
    let mut x = 0.0;
    let mut branch = vec![f0];
    let mut drift: f64 = 0.0;
    let mut outcome = ShootingOutcome::Decaying;
    let mut stop: Option<ShootingOutcome> = None;
    for j in 1..=half {
        let target = h * j as f64;
        let mut watch = |_x: f64, v: &[f64]| -> Result<()> {
            drift = drift.max((energy_density(v[0], v[1], gp) - e0).abs());
            if v[0].abs() > BLOW_UP {
                stop = Some(ShootingOutcome::BlowUp);
            } else if v[0] < VANISH {
                let tangential = v[1].abs() < 1e-4;
                stop = Some(if !gp.is_super() && tangential {
                    ShootingOutcome::CompactSupport
                } else {
                    ShootingOutcome::SignChange
                });
            } else if v[1] > 0.0 {
                // For p < 2 the separatrix reaches 0 with zero speed; rounding
                // in E turns it around at f ~ |δE|^{1/p} instead.
                stop = Some(if !gp.is_super() && v[0] < TOUCH_DOWN {
                    ShootingOutcome::CompactSupport
                } else {
                    ShootingOutcome::Oscillating
                });
            }
            if stop.is_some() {
                Err(Error::NotConverged("shooting", "branch classified".into()))
            } else {
                Ok(())
            }
        };
        match it.advance_to(&mut x, &mut y, target, &mut rhs, &mut watch) {
            Ok(()) => branch.push(y[0]),
            Err(Error::NotConverged(..)) => break,
            Err(Error::StepFailure { .. }) => {
                stop = Some(ShootingOutcome::BlowUp);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(o) = stop {
        outcome = o;
    }
    if outcome == ShootingOutcome::CompactSupport {
        branch.resize(half + 1, 0.0);
    }
    let m = branch.len() - 1;
    let x_stop = h * m as f64;
    let grid = Arc::new(WeightedGrid::uniform(-x_stop.max(4.0 * h), x_stop.max(4.0 * h), 2 * m.max(4) + 1)?);
    let mut values: Vec<f64> = branch.iter().rev().cloned().collect();
    values.extend(branch.iter().skip(1));
    values.resize(grid.len(), *branch.last().unwrap_or(&0.0));
    let solution = GridFunction::new(grid, values, false)?;
    Ok(ShootingResult {
        outcome,
        solution,
        x_stop,
        energy_drift: drift,
    })
}
