//! Changes of variables: z = tanh x, y = tan x, stereographic projection and
//! the Emden-Fowler substitution.

use std::sync::Arc;

use serde::Serialize;

use super::Optimizer;
use crate::constants::{GNParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, WeightedGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransformKind {
    /// f on (−1,1) ↔ v = v⋆ · f∘tanh on ℝ (p > 2)
    TanhMap,
    /// f on ℝ ↔ v = v∗ · f∘tan on (−π/2, π/2) (p < 2)
    TanMap,
    /// u on (0,∞) ↔ f(z) = u(r)(1 − z)^{−(d−2)/2} with z = 1 − 2/(1 + r²)
    Stereographic,
    /// v on ℝ ↔ u(r) = r^{1−d/2} v(log r)
    EmdenFowler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub direction: Direction,
    pub p: GNParams,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, direction: Direction, p: GNParams) -> Self {
        TransformSpec { kind, direction, p }
    }
}

fn sample(source: &GridFunction, at: f64, strict: bool) -> Result<f64> {
    if strict && !source.grid.spans(at) {
        return Err(Error::DomainMismatch(format!(
            "point {at} lies outside the source node range"
        )));
    }
    Ok(source.grid.interpolate(&source.values, at))
}

/// Resamples `f` through the change of variables onto `target`.
pub fn transform(f: &GridFunction, spec: &TransformSpec, target: &Arc<WeightedGrid>) -> Result<GridFunction> {
    let gp = &spec.p;
    let need = |r: Regime, what: &str| -> Result<()> {
        if gp.regime == r {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!("{what} needs the other regime")))
        }
    };
    let star = Optimizer::primal(gp);
    let nodes = target.nodes();
    let mut values = Vec::with_capacity(nodes.len());
    match (spec.kind, spec.direction) {
        (TransformKind::TanhMap, Direction::Forward) => {
            need(Regime::Supercritical, "tanh map")?;
            for &x in nodes {
                values.push(star.eval_at(x) * sample(f, x.tanh(), false)?);
            }
        }
        (TransformKind::TanhMap, Direction::Inverse) => {
            need(Regime::Supercritical, "tanh map")?;
            let ratio = ratio_to(f, &star);
            for &z in nodes {
                if z.abs() >= 1.0 {
                    return Err(Error::DomainMismatch("z must lie in (−1, 1)".into()));
                }
                values.push(sample(&ratio, z.atanh(), true)?);
            }
        }
        (TransformKind::TanMap, Direction::Forward) => {
            need(Regime::Subcritical, "tan map")?;
            for &x in nodes {
                if x.abs() >= std::f64::consts::FRAC_PI_2 {
                    return Err(Error::DomainMismatch("x must lie in (−π/2, π/2)".into()));
                }
                values.push(star.eval_at(x) * sample(f, x.tan(), false)?);
            }
        }
        (TransformKind::TanMap, Direction::Inverse) => {
            need(Regime::Subcritical, "tan map")?;
            let ratio = ratio_to(f, &star);
            for &y in nodes {
                values.push(sample(&ratio, y.atan(), true)?);
            }
        }
        (TransformKind::Stereographic, dir) => {
            need(Regime::Supercritical, "stereographic projection")?;
            let k = gp.d.unwrap() / 2.0 - 1.0;
            for &t in nodes {
                let v = match dir {
                    Direction::Forward => {
                        if t.abs() >= 1.0 {
                            return Err(Error::DomainMismatch("z must lie in (−1, 1)".into()));
                        }
                        let r = ((1.0 + t) / (1.0 - t)).sqrt();
                        sample(f, r, true)? * (1.0 - t).powf(-k)
                    }
                    Direction::Inverse => {
                        if t <= 0.0 {
                            return Err(Error::DomainMismatch("r must be positive".into()));
                        }
                        let z = 1.0 - 2.0 / (1.0 + t * t);
                        sample(f, z, true)? * (2.0 / (1.0 + t * t)).powf(k)
                    }
                };
                values.push(v);
            }
        }
        (TransformKind::EmdenFowler, dir) => {
            need(Regime::Supercritical, "Emden-Fowler substitution")?;
            let k = gp.d.unwrap() / 2.0 - 1.0;
            for &t in nodes {
                let v = match dir {
                    Direction::Forward => {
                        if t <= 0.0 {
                            return Err(Error::DomainMismatch("r must be positive".into()));
                        }
                        t.powf(-k) * sample(f, t.ln(), true)?
                    }
                    Direction::Inverse => (k * t).exp() * sample(f, t.exp(), true)?,
                };
                values.push(v);
            }
        }
    }
    Ok(GridFunction {
        grid: target.clone(),
        strictly_positive: values.iter().all(|&v| v > 0.0),
        values,
    })
}

fn ratio_to(v: &GridFunction, star: &Optimizer) -> GridFunction {
    let values = v
        .values
        .iter()
        .zip(v.nodes())
        .map(|(&a, &x)| a / star.eval_at(x))
        .collect();
    v.with_values(values)
}
