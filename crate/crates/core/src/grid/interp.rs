//! Local Lagrange interpolation on sorted nodes.

/// Six-point Lagrange interpolation of `(xs, ys)` at `x` (clamped stencil at
/// the ends, extrapolates outside the node range).
pub fn lagrange6(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let width = n.min(6);
    let i = xs.partition_point(|&v| v < x);
    let start = i.saturating_sub(width / 2).min(n - width);
    let nodes = &xs[start..start + width];
    let vals = &ys[start..start + width];
    let mut acc = 0.0;
    for (j, (&xj, &yj)) in nodes.iter().zip(vals).enumerate() {
        if x == xj {
            return yj;
        }
        let mut l = 1.0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                l *= (x - xk) / (xj - xk);
            }
        }
        acc += l * yj;
    }
    acc
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes)
/// through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n, "pchip needs at least two knots");
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                let (a, b) = (delta[i - 1], delta[i]);
                if a * b > 0.0 {
                    let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    d[i] = (w1 + w2) / (w1 / a + w2 / b);
                }
            }
            d[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], delta[0], delta[1]);
            d[n - 1] = end_slope(xs[n - 1] - xs[n - 2], xs[n - 2] - xs[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { xs, ys, d }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = ((x - self.xs[i]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.d[i] + h01 * self.ys[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
