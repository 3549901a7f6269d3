//! The two brackets of the logarithmic Sobolev limit of the duality.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, WeightedGrid};

fn x_log_x(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// log(‖G‖₁³ / (2π∫|y|²G)) − 2∫G log G / ‖G‖₁ − 1. Invariant under
/// G ↦ λG(µy).
pub fn logsob_sup_bracket(g: &GridFunction) -> Result<f64> {
    let mass = g.integrate();
    let mom = g
        .grid
        .integrate_values(&g.values.iter().zip(g.nodes()).map(|(v, y)| v * y * y).collect::<Vec<_>>());
    if !(mass > 0.0 && mom > 0.0) {
        return Err(Error::DivisionByZero("logsob_sup_bracket"));
    }
    let ent = g.grid.integrate_values(&g.values.iter().map(|&v| x_log_x(v)).collect::<Vec<_>>());
    Ok((mass.powi(3) / (2.0 * PI * mom)).ln() - 2.0 * ent / mass - 1.0)
}

/// log((2/(πe))‖f′‖²/‖f‖²) − 2∫f² log(f²/‖f‖²) / ‖f‖², invariant under
/// f ↦ λf(µx).
pub fn logsob_inf_bracket(f: &GridFunction) -> Result<f64> {
    let df = f.derivative(1)?;
    let grad = df.grid.integrate_values(&df.values.iter().map(|d| d * d).collect::<Vec<_>>());
    let l2 = f.grid.integrate_values(&f.values.iter().map(|v| v * v).collect::<Vec<_>>());
    if !(grad > 0.0 && l2 > 0.0) {
        return Err(Error::DivisionByZero("logsob_inf_bracket"));
    }
    let ent = f
        .grid
        .integrate_values(&f.values.iter().map(|&v| x_log_x(v * v / l2)).collect::<Vec<_>>());
    Ok((2.0 / (PI * E) * grad / l2).ln() - 2.0 * ent)
}

/// Inf-side bracket at f = sech: log(2/(3πe)) + 4 − 2 log 2.
pub fn logsob_sech_closed_form() -> f64 {
    (2.0 / (3.0 * PI * E)).ln() + 4.0 - 2.0 * 2f64.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSobSample {
    pub label: String,
    pub sup_side: f64,
    pub inf_side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSobReport {
    pub gaussian_sup: f64,
    pub gaussian_inf: f64,
    pub samples: Vec<LogSobSample>,
    /// max of the sup-side over all samples (≤ 0 up to discretization)
    pub max_sup: f64,
    /// min of the inf-side over all samples (≥ 0 up to discretization)
    pub min_inf: f64,
}

pub fn logsob_grid() -> Result<Arc<WeightedGrid>> {
    Ok(Arc::new(WeightedGrid::uniform(-24.0, 24.0, 6001)?))
}

fn gaussian_density(y: f64, variance: f64) -> f64 {
    (-y * y / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

type Perturbation = (&'static str, fn(f64) -> f64);

const PERTURBATIONS: [Perturbation; 4] = [
    ("cosine", |y| y.cos()),
    ("quartic", |y| y.powi(4) / (1.0 + y.powi(4))),
    ("odd", |y| y / (1.0 + y * y)),
    ("bump", |y| (-(y - 1.0).powi(2)).exp()),
];

/// Both brackets at the standard Gaussian and at multiplicative perturbations
/// G = e^{εh}γ, f = e^{εh/2}√γ.
pub fn logsob_limit_check() -> Result<LogSobReport> {
    let grid = logsob_grid()?;
    let gauss = GridFunction::from_fn(&grid, |y| gaussian_density(y, 1.0));
    let root = gauss.map(f64::sqrt);
    let gaussian_sup = logsob_sup_bracket(&gauss)?;
    let gaussian_inf = logsob_inf_bracket(&root)?;
    let mut samples = Vec::new();
    for (label, h) in PERTURBATIONS {
        for eps in [1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let g = GridFunction::from_fn(&grid, |y| (eps * h(y)).exp() * gaussian_density(y, 1.0));
            let f = g.map(f64::sqrt);
            samples.push(LogSobSample {
                label: format!("{label}:{eps}"),
                sup_side: logsob_sup_bracket(&g)?,
                inf_side: logsob_inf_bracket(&f)?,
            });
        }
    }
    let max_sup = samples.iter().map(|s| s.sup_side).fold(gaussian_sup, f64::max);
    let min_inf = samples.iter().map(|s| s.inf_side).fold(gaussian_inf, f64::min);
    Ok(LogSobReport {
        gaussian_sup,
        gaussian_inf,
        samples,
        max_sup,
        min_inf,
    })
}
