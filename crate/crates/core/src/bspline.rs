//! Uniform B-spline bases whose natural domain is the unit interval.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TnbsError};
use crate::exec::{Execution, CHUNK_ROWS};

/// Degree `rho`, knot parameter `m` (knots `t_0..t_m`) and the derived
/// uniform knot vector `t_i = (i - rho) / (m - 2 rho)`, which places the
/// natural domain `[t_rho, t_{m-rho}]` on `[0, 1]`. There are `m - rho`
/// basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisParams", into = "BasisParams")]
pub struct BasisConfig {
    degree: usize,
    knot_param: usize,
    knots: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BasisParams {
    degree: usize,
    knot_param: usize,
}

impl TryFrom<BasisParams> for BasisConfig {
    type Error = TnbsError;

    fn try_from(p: BasisParams) -> Result<Self> {
        BasisConfig::new(p.degree, p.knot_param)
    }
}

impl From<BasisConfig> for BasisParams {
    fn from(b: BasisConfig) -> Self {
        BasisParams { degree: b.degree, knot_param: b.knot_param }
    }
}

impl BasisConfig {
    pub fn new(degree: usize, knot_param: usize) -> Result<Self> {
        if knot_param <= 2 * degree {
            return Err(TnbsError::Config(format!(
                "knot parameter m={knot_param} must exceed twice the degree ({degree})"
            )));
        }
        let segments = (knot_param - 2 * degree) as f64;
        let knots = (0..=knot_param)
            .map(|i| (i as f64 - degree as f64) / segments)
            .collect();
        Ok(Self { degree, knot_param, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knot_param(&self) -> usize {
        self.knot_param
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `k = m - rho`.
    pub fn basis_count(&self) -> usize {
        self.knot_param - self.degree
    }

    fn segments(&self) -> usize {
        self.knot_param - 2 * self.degree
    }

    /// Evaluates all `k` basis functions at `x`. Inputs outside `[0, 1]` are
    /// clipped; `x = 1` takes the left limit so the basis sums to one on the
    /// closed interval.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.basis_count()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes the basis vector at `x` into `out` (length `k`) and returns
    /// whether `x` had to be clipped.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<bool> {
        if !x.is_finite() {
            return Err(TnbsError::Input(format!("non-finite basis argument {x}")));
        }
        debug_assert_eq!(out.len(), self.basis_count());
        let clipped = !(0.0..=1.0).contains(&x);
        let x = x.clamp(0.0, 1.0);
        let rho = self.degree;
        let span = self.span(x);

        // Local Cox-de Boor triangle over the rho+1 functions that are
        // non-zero on [t_span, t_{span+1}).
        let mut vals = [0.0f64; MAX_LOCAL];
        let mut left = [0.0f64; MAX_LOCAL];
        let mut right = [0.0f64; MAX_LOCAL];
        let mut heap;
        let (vals, left, right): (&mut [f64], &mut [f64], &mut [f64]) = if rho < MAX_LOCAL {
            (&mut vals[..=rho], &mut left[..=rho], &mut right[..=rho])
        } else {
            heap = vec![0.0; 3 * (rho + 1)];
            let (a, rest) = heap.split_at_mut(rho + 1);
            let (b, c) = rest.split_at_mut(rho + 1);
            (a, b, c)
        };
        let t = &self.knots;
        vals[0] = 1.0;
        for j in 1..=rho {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { vals[r] / denom };
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        out.fill(0.0);
        out[span - rho..=span].copy_from_slice(vals);
        Ok(clipped)
    }

    /// Knot index `s` with `t_s <= x < t_{s+1}`, restricted to the natural
    /// domain so that `x = 1` falls in the last interval.
    fn span(&self, x: f64) -> usize {
        let rho = self.degree;
        let segs = self.segments();
        let mut s = rho + ((x * segs as f64).floor() as usize).min(segs - 1);
        // Guard against rounding in the product above.
        if s > rho && x < self.knots[s] {
            s -= 1;
        } else if s < rho + segs - 1 && x >= self.knots[s + 1] {
            s += 1;
        }
        s
    }

    /// Basis vectors of a batch of points.
    pub fn rows(&self, xs: &[f64]) -> Result<BasisRows> {
        self.rows_with(xs, Execution::Sequential)
    }

    pub fn rows_with(&self, xs: &[f64], exec: Execution) -> Result<BasisRows> {
        let k = self.basis_count();
        let parts = exec.map_chunks(xs.len(), CHUNK_ROWS, |range| {
            let mut values = vec![0.0; range.len() * k];
            let mut clipped = 0;
            for (row, &x) in values.chunks_mut(k).zip(&xs[range]) {
                clipped += usize::from(self.eval_into(x, row)?);
            }
            Ok((values, clipped))
        });
        let mut values = Vec::with_capacity(xs.len() * k);
        let mut clipped = 0;
        for part in parts {
            let (v, c): (Vec<f64>, usize) = part?;
            values.extend_from_slice(&v);
            clipped += c;
        }
        Ok(BasisRows { k, values, clipped })
    }
}

const MAX_LOCAL: usize = 8;

/// Row-major `n x k` block of basis vectors plus the number of clipped inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRows {
    k: usize,
    values: Vec<f64>,
    clipped: usize,
}

impl BasisRows {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.values.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.k..(n + 1) * self.k]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.k)
    }

    pub fn basis_count(&self) -> usize {
        self.k
    }

    pub fn clipped(&self) -> usize {
        self.clipped
    }
}
