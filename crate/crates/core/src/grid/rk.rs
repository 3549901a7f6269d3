//! Dormand-Prince 5(4) embedded Runge-Kutta with step-size control and an
//! optional positivity floor.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Relative floor ε applied as ε·max(values) to strictly positive states.
    pub floor: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            atol: 1e-8,
            rtol: 1e-8,
            dt_min: 1e-12,
            dt_max: f64::INFINITY,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub dt_taken: f64,
    pub dt_next: f64,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Scratch space for repeated steps on states of a fixed length.
pub struct Dp45 {
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    y5: Vec<f64>,
}

impl Dp45 {
    pub fn new(n: usize) -> Self {
        Dp45 {
            k: vec![vec![0.0; n]; 7],
            stage: vec![0.0; n],
            y5: vec![0.0; n],
        }
    }

    /// One attempt of size `dt`; returns the scaled error norm. On success
    /// the fifth-order solution is left in `self.y5`.
    fn attempt<F>(&mut self, t: f64, y: &[f64], dt: f64, ctl: &StepControl, rhs: &mut F) -> Result<f64>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        rhs(t, y, &mut self.k[0])?;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.stage[i] = y[i] + dt * acc;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * dt, &self.stage, &mut tail[0])?;
        }
        let mut sq = 0.0;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * self.k[s][i];
                lo += B4[s] * self.k[s][i];
            }
            let y_new = y[i] + dt * hi;
            self.y5[i] = y_new;
            let scale = ctl.atol + ctl.rtol * y[i].abs().max(y_new.abs());
            let e = dt * (hi - lo) / scale;
            sq += e * e;
        }
        Ok((sq / n.max(1) as f64).sqrt())
    }

    /// Takes one accepted step starting from a trial size `dt`, shrinking on
    /// rejection. `y` is overwritten with the new state.
    pub fn step<F>(&mut self, t: f64, y: &mut [f64], dt: f64, ctl: &StepControl, rhs: &mut F) -> Result<StepOutcome>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        if !(dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt = {dt} must be positive")));
        }
        let mut h = dt.min(ctl.dt_max);
        let mut rejected = 0;
        let mut last_reason = String::new();
        let mut shrink = 0.5;
        loop {
            if h < ctl.dt_min {
                return Err(Error::StepFailure {
                    t,
                    dt: h,
                    reason: format!("step size underflow after {rejected} rejections: {last_reason}"),
                });
            }
            match self.attempt(t, y, h, ctl, rhs) {
                Ok(err) if err.is_finite() && err <= 1.0 && self.y5.iter().all(|v| v.is_finite()) => {
                    y.copy_from_slice(&self.y5);
                    let grow = if err == 0.0 {
                        1.5
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 1.5)
                    };
                    return Ok(StepOutcome {
                        dt_taken: h,
                        dt_next: (h * grow).min(ctl.dt_max),
                        rejected,
                    });
                }
                Ok(err) => {
                    if err.is_finite() {
                        shrink = (0.9 * err.powf(-0.2)).clamp(0.2, 0.8);
                    }
                    last_reason = if err.is_finite() {
                        format!("error estimate {err:e}")
                    } else {
                        "non-finite state".into()
                    };
                }
                Err(Error::StepFailure { reason, .. }) => last_reason = reason,
                Err(e) => return Err(e),
            }
            rejected += 1;
            h *= shrink;
            shrink = 0.5;
        }
    }
}

/// Clamp values below `floor·max` to that level; returns how many were moved.
pub fn apply_floor(y: &mut [f64], floor: f64) -> usize {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let level = floor * max.max(0.0);
    let mut count = 0;
    for v in y.iter_mut() {
        if *v < level {
            *v = level;
            count += 1;
        }
    }
    count
}

/// Adaptive time marching with exact landing on requested output times.
pub struct Integrator {
    pub ctl: StepControl,
    pub dt: f64,
    pub positive: bool,
    pub clamp_events: usize,
    pub accepted: usize,
    pub rejected: usize,
    work: Dp45,
}

impl Integrator {
    pub fn new(n: usize, ctl: StepControl, dt0: f64, positive: bool) -> Self {
        Integrator {
            ctl,
            dt: dt0,
            positive,
            clamp_events: 0,
            accepted: 0,
            rejected: 0,
            work: Dp45::new(n),
        }
    }

    /// Advances `(t, y)` to `t_target`, calling `on_step` after every
    /// accepted step.
    pub fn advance_to<F, S>(&mut self, t: &mut f64, y: &mut [f64], t_target: f64, rhs: &mut F, on_step: &mut S) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
        S: FnMut(f64, &[f64]) -> Result<()>,
    {
        while *t < t_target {
            let remaining = t_target - *t;
            let landing = self.dt >= remaining * (1.0 - 1e-12);
            let trial = if landing { remaining } else { self.dt };
            let out = self.work.step(*t, y, trial, &self.ctl, rhs)?;
            self.rejected += out.rejected;
            self.accepted += 1;
            let full = landing && out.rejected == 0;
            *t = if full { t_target } else { *t + out.dt_taken };
            // a clipped landing step says nothing against the previous size
            self.dt = if full { self.dt.max(out.dt_next) } else { out.dt_next };
            if self.positive {
                self.clamp_events += apply_floor(y, self.ctl.floor);
            }
            on_step(*t, y)?;
        }
        Ok(())
    }
}
