//! u_t = u^{2−2β}(𝖫u + κ w |u′|²/u), which is the f-flow for f = u^β when
//! β = 4/(6−p) and κ = β(p−2)+1.

use std::sync::Arc;

use super::{check_ultra_grid, drive, ultra_functional, FlowConfig, FlowModel, FlowTrace};
use crate::constants::GNParams;
use crate::error::{Error, Result};
use crate::functionals::ultra_weight;
use crate::grid::{GridFunction, WeightedGrid};

struct GenU<'a> {
    grid: &'a WeightedGrid,
    gp: GNParams,
    beta: f64,
    kappa: f64,
}

impl FlowModel for GenU<'_> {
    fn rhs(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        super::positivity(u)?;
        let d1 = self.grid.diff(u, 1)?;
        let d2 = self.grid.diff(u, 2)?;
        let k = self.gp.drift();
        for i in 0..u.len() {
            let x = self.grid.nodes()[i];
            let w = ultra_weight(&self.gp, x);
            let l = w * d2[i] - k * x * d1[i];
            out[i] = u[i].powf(2.0 - 2.0 * self.beta) * (l + self.kappa * w * d1[i] * d1[i] / u[i]);
        }
        Ok(())
    }
    fn functional(&self, u: &[f64]) -> Result<f64> {
        u_functional(self.grid, &self.gp, self.beta, u)
    }
    fn dissipation(&self, u: &[f64]) -> Result<f64> {
        u_dissipation(self.grid, &self.gp, u)
    }
    fn conserved(&self, u: &[f64]) -> f64 {
        u_norm(self.grid, &self.gp, self.beta, u)
    }
}

/// (1/(2β²)) 𝖥[u^β].
pub fn u_functional(grid: &WeightedGrid, gp: &GNParams, beta: f64, u: &[f64]) -> Result<f64> {
    let f: Vec<f64> = u.iter().map(|v| v.powf(beta)).collect();
    Ok(ultra_functional(grid, gp, &f)? / (2.0 * beta * beta))
}

/// ∫|u″ − ((p+2)/(6−p)) |u′|²/u|² w².
pub fn u_dissipation(grid: &WeightedGrid, gp: &GNParams, u: &[f64]) -> Result<f64> {
    let d1 = grid.diff(u, 1)?;
    let d2 = grid.diff(u, 2)?;
    let c = (gp.p + 2.0) / (6.0 - gp.p);
    let vals: Vec<f64> = (0..u.len())
        .map(|i| {
            let w = ultra_weight(gp, grid.nodes()[i]);
            let r = d2[i] - c * d1[i] * d1[i] / u[i];
            r * r * w * w
        })
        .collect();
    Ok(grid.integrate_values(&vals))
}

/// ū = (∫u^{βp})^{1/(βp)}.
pub fn u_norm(grid: &WeightedGrid, gp: &GNParams, beta: f64, u: &[f64]) -> f64 {
    let e = beta * gp.p;
    grid.integrate_values(&u.iter().map(|v| v.powf(e)).collect::<Vec<_>>()).powf(1.0 / e)
}

/// Predicted d/dt ∫u^{βp} = βp(κ − β(p−2) − 1) ∫u^{β(p−2)} |u′|² w.
pub fn u_power_rate(grid: &WeightedGrid, gp: &GNParams, beta: f64, kappa: f64, u: &[f64]) -> Result<f64> {
    let p = gp.p;
    let d1 = grid.diff(u, 1)?;
    let vals: Vec<f64> = (0..u.len())
        .map(|i| u[i].powf(beta * (p - 2.0)) * d1[i] * d1[i] * ultra_weight(gp, grid.nodes()[i]))
        .collect();
    Ok(beta * p * (kappa - beta * (p - 2.0) - 1.0) * grid.integrate_values(&vals))
}

/// Runs the u-flow in the ultraspherical frame of `cfg`. The trace's
/// lyapunov column is (1/(2β²))𝖥[u^β], dissipation_rhs the completed
/// square, conserved_norm ū.
pub fn generalized_flow_u(beta: f64, kappa: f64, cfg: &FlowConfig, initial: &GridFunction) -> Result<FlowTrace> {
    let gp = cfg.p;
    if gp.beta.is_none() {
        return Err(Error::InvalidParams(
            "p = 6: β = 4/(6−p) is undefined; run the f-form flow (Frame::UltraF) instead".into(),
        ));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParams(format!("β = {beta} must be positive")));
    }
    check_ultra_grid(&cfg.grid, &gp)?;
    let grid: &Arc<WeightedGrid> = &cfg.grid;
    let m = GenU {
        grid,
        gp,
        beta,
        kappa,
    };
    drive(&m, initial, cfg.t_end, cfg.output_stride, cfg.control, cfg.dt0, grid)
}
