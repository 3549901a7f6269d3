//! Exponent bookkeeping and the closed-form constants of the two
//! Gagliardo-Nirenberg-Sobolev regimes.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{h_of_q, log_sqrt_pi_gamma_ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// p > 2
    Supercritical,
    /// 1 < p < 2
    Subcritical,
}

/// The exponent p together with every exponent derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GNParams {
    pub p: f64,
    pub regime: Regime,
    pub theta: f64,
    pub eta: f64,
    /// 2p/(p−2), only meaningful when p > 2.
    pub d: Option<f64>,
    /// 4/(6−p); undefined at p = 6.
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
    pub q_dual: f64,
    pub m_fd: f64,
}

impl GNParams {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidParams(format!("p = {p} must satisfy p > 1")));
        }
        if p == 2.0 {
            return Err(Error::InvalidParams(
                "p = 2 is the logarithmic Sobolev limit; use log_sobolev_limits".into(),
            ));
        }
        let regime = if p > 2.0 {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        };
        let beta = if p == 6.0 { None } else { Some(4.0 / (6.0 - p)) };
        let (q_dual, m_fd) = match regime {
            Regime::Supercritical => (
                (3.0 * p - 2.0) / (2.0 * (p - 2.0)),
                (p + 2.0) / (3.0 * p - 2.0),
            ),
            Regime::Subcritical => ((4.0 - p) / (2.0 - p), 2.0 / (4.0 - p)),
        };
        Ok(GNParams {
            p,
            regime,
            theta: (p - 2.0) / (2.0 * p),
            eta: (2.0 - p) / (2.0 + p),
            d: (p > 2.0).then(|| 2.0 * p / (p - 2.0)),
            beta,
            kappa: beta.map(|b| b * (p - 2.0) + 1.0),
            q_dual,
            m_fd,
        })
    }

    pub fn is_super(&self) -> bool {
        self.regime == Regime::Supercritical
    }

    /// Exponent 2/|p−2| of the sech / cos optimizer.
    pub fn profile_exponent(&self) -> f64 {
        2.0 / (self.p - 2.0).abs()
    }

    /// Drift coefficient 2p/|p−2| of the ultraspherical operator.
    pub fn drift(&self) -> f64 {
        2.0 * self.p / (self.p - 2.0).abs()
    }

    /// Exponents (m, a, b) of the dual quotient ∫G^m / ((∫G|y|²)^a (∫G)^b).
    pub fn dual_exponents(&self) -> (f64, f64, f64) {
        let p = self.p;
        match self.regime {
            Regime::Supercritical => (
                (p + 2.0) / (3.0 * p - 2.0),
                (p - 2.0) / (3.0 * p - 2.0),
                4.0 / (3.0 * p - 2.0),
            ),
            Regime::Subcritical => (
                2.0 / (4.0 - p),
                (2.0 - p) / (2.0 * (4.0 - p)),
                (p + 2.0) / (2.0 * (4.0 - p)),
            ),
        }
    }

    /// 2p/(p−2)²: the coefficient of the mass deficit in the ultraspherical
    /// functional, and the rigidity threshold in λ.
    pub fn threshold(&self) -> f64 {
        2.0 * self.p / ((self.p - 2.0) * (self.p - 2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsTable {
    pub c_p: f64,
    /// I₂ = ∫f⋆² for p > 2, J₂ = ∫f∗² for p < 2.
    pub i2_or_j2: f64,
    /// C₁(p) or C₂(p).
    pub c1_or_c2: f64,
    /// Smallest constant in the GNS inequality written with the p-norm
    /// (p > 2) or the 2-norm (p < 2) on the left.
    pub c_gn: f64,
    pub zeta_p: f64,
}

pub fn ln_c_p(p: f64) -> f64 {
    if p > 2.0 {
        2.0 * (p - 2.0) / (3.0 * p - 2.0) * ((p + 2.0) / 2.0).ln()
    } else {
        (2.0 - p) / (4.0 - p) * 2f64.ln()
    }
}

pub fn constants_for(gp: &GNParams) -> Result<ConstantsTable> {
    let p = gp.p;
    let ln_c = ln_c_p(p);
    let (ln_norm, ln_big, ln_zeta, gn_exp) = match gp.regime {
        Regime::Supercritical => {
            let ln_i2 = log_sqrt_pi_gamma_ratio(2.0 / (p - 2.0), (p + 2.0) / (2.0 * (p - 2.0)))?;
            let s = 3.0 * p - 2.0;
            let ln_c1 = (p + 2.0) / s * (p + 2.0).ln() - 4.0 / s * 4f64.ln()
                - (p - 2.0) / s * (p - 2.0).ln()
                + 2.0 * (p - 2.0) / s * ln_i2;
            let ln_zeta = log_sqrt_pi_gamma_ratio(p / (p - 2.0), s / (2.0 * (p - 2.0)))?;
            (ln_i2, ln_c1, ln_zeta, -s / (4.0 * p))
        }
        Regime::Subcritical => {
            let ln_j2 = log_sqrt_pi_gamma_ratio(
                (6.0 - p) / (2.0 * (2.0 - p)),
                (4.0 - p) / (2.0 - p),
            )?;
            let s = 4.0 - p;
            let ln_c2 = 4f64.ln() - (6.0 - p) / (2.0 * s) * (2.0 + p).ln()
                - (2.0 - p) / (2.0 * s) * (2.0 - p).ln()
                + (2.0 - p) / s * ln_j2;
            let ln_zeta = log_sqrt_pi_gamma_ratio((2.0 + p) / (2.0 * (2.0 - p)), 2.0 / (2.0 - p))?;
            (ln_j2, ln_c2, ln_zeta, -s / (2.0 + p))
        }
    };
    Ok(ConstantsTable {
        c_p: ln_c.exp(),
        i2_or_j2: ln_norm.exp(),
        c1_or_c2: ln_big.exp(),
        c_gn: (gn_exp * (ln_big - ln_c)).exp(),
        zeta_p: ln_zeta.exp(),
    })
}

/// Moments of the dual optimizer (1+y²)^{−q} with q = q_dual:
/// (∫G, ∫G|y|², ∫G^m).
pub fn dual_moments(gp: &GNParams) -> Result<(f64, f64, f64)> {
    let q = gp.q_dual;
    let h = h_of_q(q)?;
    Ok((h, h / (2.0 * q - 3.0), 2.0 * (q - 1.0) / (2.0 * q - 3.0) * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogSobolevLimits {
    pub limit_c1: f64,
    pub slope: f64,
}

/// The analytic values lim C₁ = lim C₂ = 1 and 4 lim (C₁−1)/(p−2) = 1 + log 2π.
pub fn log_sobolev_limits() -> LogSobolevLimits {
    LogSobolevLimits {
        limit_c1: 1.0,
        slope: 1.0 + (2.0 * PI).ln(),
    }
}

/// One-sided difference quotients of the slope at p = 2 ± h:
/// (4(C₁(2+h) − 1)/h, 4(C₂(2−h) − 1)/h). Both constants exceed 1 near
/// p = 2, so both quotients approach 1 + log 2π from above.
pub fn log_sobolev_fd_estimates(h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParams(format!("step h = {h} must lie in (0,1)")));
    }
    let above = constants_for(&GNParams::new(2.0 + h)?)?.c1_or_c2;
    let below = constants_for(&GNParams::new(2.0 - h)?)?.c1_or_c2;
    Ok((4.0 * (above - 1.0) / h, 4.0 * (below - 1.0) / h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_and_rejections() {
        assert!(GNParams::new(1.0).is_err());
        assert!(GNParams::new(0.5).is_err());
        assert!(GNParams::new(2.0).is_err());
        assert_eq!(GNParams::new(3.0).unwrap().regime, Regime::Supercritical);
        assert_eq!(GNParams::new(1.5).unwrap().regime, Regime::Subcritical);
        let g = GNParams::new(6.0).unwrap();
        assert!(g.beta.is_none() && g.kappa.is_none());
    }

    #[test]
    fn p4_values() {
        let t = constants_for(&GNParams::new(4.0).unwrap()).unwrap();
        assert!((t.i2_or_j2 - 2.0).abs() < 1e-14);
        assert!((t.zeta_p - 4.0 / 3.0).abs() < 1e-14);
        assert!((t.c_p - 3f64.powf(0.4)).abs() < 1e-14);
    }

    #[test]
    fn wallis_value() {
        let t = constants_for(&GNParams::new(1.5).unwrap()).unwrap();
        assert!((t.i2_or_j2 - 35.0 * PI / 128.0).abs() < 1e-13);
    }

    #[test]
    fn c_p_tends_to_one() {
        for p in [2.0 - 1e-4, 2.0 + 1e-4] {
            let t = constants_for(&GNParams::new(p).unwrap()).unwrap();
            assert!((t.c_p - 1.0).abs() < 1e-3);
            assert!((t.c1_or_c2 - 1.0).abs() < 1e-3);
        }
    }
}
