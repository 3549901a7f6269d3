//! Finite-difference weights on arbitrary node sets.

/// Fornberg's recursion: `c[k][j]` is the weight of `xs[j]` in the k-th
/// derivative at `z`, for k = 0..=m.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Banded differentiation matrix stored row by row.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    rows: Vec<(usize, Vec<f64>)>,
}

impl DiffMatrix {
    /// Five-point centred rows in the interior; one-sided rows of `edge_width`
    /// points at the two ends.
    pub fn build(xs: &[f64], order: usize, edge_width: usize) -> Self {
        let n = xs.len();
        assert!(n >= edge_width.max(5), "need at least {} nodes", edge_width.max(5));
        let rows = (0..n)
            .map(|i| {
                let start = if i >= 2 && i + 2 < n {
                    i - 2
                } else if i < 2 {
                    0
                } else {
                    n - edge_width
                };
                let width = if i >= 2 && i + 2 < n { 5 } else { edge_width };
                let w = fornberg_weights(xs[i], &xs[start..start + width], order);
                (start, w[order].clone())
            })
            .collect();
        DiffMatrix { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.rows) {
            *o = w.iter().zip(&v[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    /// Dᵀ v.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (vi, (start, w)) in v.iter().zip(&self.rows) {
            for (k, wk) in w.iter().enumerate() {
                out[start + k] += wk * vi;
            }
        }
        out
    }
}
