//! The linear subproblem of one core update.
//!
//! With every other core fixed, the model output on sample `n` is
//! `a_n^T g` where `g` is the vectorized core and
//! `a_n = v_>(n) (x) b_n (x) v_<(n)`; `v_<` and `v_>` are the contractions of
//! the cores left and right of the updated one with their basis vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::bspline::BasisRows;
use crate::error::{Result, TnbsError};
use crate::exec::{Execution, CHUNK_ROWS};
use crate::tensor::{dims, DenseTensor, TensorTrain};

/// Cholesky is trusted below this estimated condition number; above it the
/// solve falls back to an eigendecomposition pseudo-inverse.
pub const CONDITION_LIMIT: f64 = 1e12;

const POWER_STEPS: usize = 12;

/// `out[a + r0 (i + k b)] = left[a] * basis[i] * right[b]`.
pub(crate) fn write_row(left: &[f64], basis: &[f64], right: &[f64], out: &mut [f64]) {
    let r0 = left.len();
    let k = basis.len();
    for (b, &rb) in right.iter().enumerate() {
        for (i, &bi) in basis.iter().enumerate() {
            let dst = &mut out[r0 * (i + k * b)..r0 * (i + k * b + 1)];
            let w = rb * bi;
            if w == 0.0 {
                dst.fill(0.0);
            } else {
                for (o, &l) in dst.iter_mut().zip(left) {
                    *o = w * l;
                }
            }
        }
    }
}

/// `a_n^T g` without forming `a_n`.
fn row_dot(left: &[f64], basis: &[f64], right: &[f64], g: &[f64]) -> f64 {
    let r0 = left.len();
    let k = basis.len();
    let mut s = 0.0;
    for (b, &rb) in right.iter().enumerate() {
        if rb == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (i, &bi) in basis.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            let col = &g[r0 * (i + k * b)..r0 * (i + k * b + 1)];
            inner += bi * col.iter().zip(left).map(|(x, y)| x * y).sum::<f64>();
        }
        s += rb * inner;
    }
    s
}

/// Left interfaces of the next core: `out_n = left_n (G x_2 b_n)`.
pub(crate) fn propagate_left(core: &DenseTensor, rows: &BasisRows, left: &[f64], exec: Execution) -> Vec<f64> {
    let (r0, k, r1) = dims(core);
    let n = rows.len();
    debug_assert_eq!(left.len(), n * r0);
    let g = core.values();
    let mut out = vec![0.0; n * r1];
    exec.fill_rows(&mut out, r1, |first, block| {
        for (off, dst) in block.chunks_mut(r1).enumerate() {
            let s = first + off;
            let l = &left[s * r0..(s + 1) * r0];
            let b = rows.row(s);
            for (beta, o) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &bi) in b.iter().enumerate() {
                    if bi != 0.0 {
                        let col = &g[r0 * (i + k * beta)..r0 * (i + k * beta + 1)];
                        acc += bi * col.iter().zip(l).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                *o = acc;
            }
        }
    });
    out
}

/// Right interfaces of the previous core: `out_n = (G x_2 b_n) right_n`.
pub(crate) fn propagate_right(core: &DenseTensor, rows: &BasisRows, right: &[f64], exec: Execution) -> Vec<f64> {
    let (r0, k, r1) = dims(core);
    let n = rows.len();
    debug_assert_eq!(right.len(), n * r1);
    let g = core.values();
    let mut out = vec![0.0; n * r0];
    exec.fill_rows(&mut out, r0, |first, block| {
        for (off, dst) in block.chunks_mut(r0).enumerate() {
            let s = first + off;
            let r = &right[s * r1..(s + 1) * r1];
            let b = rows.row(s);
            dst.fill(0.0);
            for (beta, &rb) in r.iter().enumerate() {
                for (i, &bi) in b.iter().enumerate() {
                    let w = rb * bi;
                    if w != 0.0 {
                        let col = &g[r0 * (i + k * beta)..r0 * (i + k * beta + 1)];
                        for (o, x) in dst.iter_mut().zip(col) {
                            *o += w * x;
                        }
                    }
                }
            }
        }
    });
    out
}

/// Left and right interfaces of every core for a fixed set of samples.
pub(crate) struct Interfaces {
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl Interfaces {
    /// Interfaces of core `p` computed from scratch (both chains).
    pub fn for_core(tt: &TensorTrain, rows: &[BasisRows], p: usize, exec: Execution) -> Self {
        let d = tt.order();
        let n = rows[0].len();
        let mut left = vec![Vec::new(); d];
        let mut right = vec![Vec::new(); d];
        left[0] = vec![1.0; n];
        for q in 0..p {
            left[q + 1] = propagate_left(tt.core(q), &rows[q], &left[q], exec);
        }
        right[d - 1] = vec![1.0; n];
        for q in (p + 1..d).rev() {
            right[q - 1] = propagate_right(tt.core(q), &rows[q], &right[q], exec);
        }
        Self { left, right }
    }
}

/// Regression matrix of core `p` (one row per sample). `rows[q]` holds the
/// basis vectors of regressor `q`.
pub fn build_a(tt: &TensorTrain, rows: &[BasisRows], p: usize) -> Result<DMatrix<f64>> {
    if tt.canonical_site() != Some(p) {
        return Err(TnbsError::CanonicalSite { expected: p, found: tt.canonical_site() });
    }
    check_rows(tt, rows)?;
    let exec = Execution::default();
    let ifs = Interfaces::for_core(tt, rows, p, exec);
    let (r0, k, r1) = dims(tt.core(p));
    let n = rows[0].len();
    let ncols = r0 * k * r1;
    let mut a = DMatrix::zeros(n, ncols);
    let mut buf = vec![0.0; ncols];
    for s in 0..n {
        write_row(
            &ifs.left[p][s * r0..(s + 1) * r0],
            rows[p].row(s),
            &ifs.right[p][s * r1..(s + 1) * r1],
            &mut buf,
        );
        for (c, &v) in buf.iter().enumerate() {
            a[(s, c)] = v;
        }
    }
    Ok(a)
}

pub(crate) fn check_rows(tt: &TensorTrain, rows: &[BasisRows]) -> Result<()> {
    if rows.len() != tt.order() {
        return Err(TnbsError::mismatch("basis row sets vs cores", rows.len(), tt.order()));
    }
    let n = rows[0].len();
    for (q, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(TnbsError::mismatch("samples per regressor", r.len(), n));
        }
        if r.basis_count() != dims(tt.core(q)).1 {
            return Err(TnbsError::mismatch("basis count vs core extent", r.basis_count(), dims(tt.core(q)).1));
        }
    }
    Ok(())
}

/// Samples used by one update: all of them in order, or an explicit subset.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Batch<'a> {
    All(usize),
    Subset(&'a [usize]),
}

impl Batch<'_> {
    fn len(&self) -> usize {
        match self {
            Batch::All(n) => *n,
            Batch::Subset(idx) => idx.len(),
        }
    }

    fn sample(&self, i: usize) -> usize {
        match self {
            Batch::All(_) => i,
            Batch::Subset(idx) => idx[i],
        }
    }
}

/// Core-local view used by the sweep: interfaces plus basis rows of one core.
pub(crate) struct CoreProblem<'a> {
    pub left: &'a [f64],
    pub right: &'a [f64],
    pub basis: &'a BasisRows,
    pub targets: &'a [f64],
    pub r0: usize,
    pub k: usize,
    pub r1: usize,
}

impl CoreProblem<'_> {
    fn ncols(&self) -> usize {
        self.r0 * self.k * self.r1
    }

    fn parts(&self, s: usize) -> (&[f64], &[f64], &[f64]) {
        (
            &self.left[s * self.r0..(s + 1) * self.r0],
            self.basis.row(s),
            &self.right[s * self.r1..(s + 1) * self.r1],
        )
    }

    /// `A^T A` and `A^T t` over the batch, accumulated chunk by chunk in a
    /// fixed order.
    pub fn normal_equations(&self, batch: Batch<'_>, exec: Execution) -> (DMatrix<f64>, DVector<f64>) {
        let ncols = self.ncols();
        let parts = exec.map_chunks(batch.len(), CHUNK_ROWS, |range| {
            let mut a = DMatrix::zeros(range.len(), ncols);
            let mut t = DVector::zeros(range.len());
            let mut buf = vec![0.0; ncols];
            for (row, i) in range.enumerate() {
                let s = batch.sample(i);
                let (l, b, r) = self.parts(s);
                write_row(l, b, r, &mut buf);
                for (c, &v) in buf.iter().enumerate() {
                    a[(row, c)] = v;
                }
                t[row] = self.targets[s];
            }
            (a.tr_mul(&a), a.tr_mul(&t))
        });
        let mut gram = DMatrix::zeros(ncols, ncols);
        let mut rhs = DVector::zeros(ncols);
        for (g, r) in parts {
            gram += g;
            rhs += r;
        }
        (gram, rhs)
    }

    /// Explicit regression matrix and targets over the batch.
    pub fn matrix(&self, batch: Batch<'_>) -> (DMatrix<f64>, DVector<f64>) {
        let ncols = self.ncols();
        let mut a = DMatrix::zeros(batch.len(), ncols);
        let mut t = DVector::zeros(batch.len());
        let mut buf = vec![0.0; ncols];
        for row in 0..batch.len() {
            let s = batch.sample(row);
            let (l, b, r) = self.parts(s);
            write_row(l, b, r, &mut buf);
            for (c, &v) in buf.iter().enumerate() {
                a[(row, c)] = v;
            }
            t[row] = self.targets[s];
        }
        (a, t)
    }

    /// `|| t - A g ||^2` over the batch.
    pub fn residual_sq(&self, g: &[f64], batch: Batch<'_>, exec: Execution) -> f64 {
        exec.map_chunks(batch.len(), CHUNK_ROWS, |range| {
            range
                .map(|i| {
                    let s = batch.sample(i);
                    let (l, b, r) = self.parts(s);
                    let e = self.targets[s] - row_dot(l, b, r, g);
                    e * e
                })
                .sum::<f64>()
        })
        .into_iter()
        .sum()
    }
}

/// Diagnostics of one core solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    /// Estimated condition number of the (reduced) system matrix: power
    /// iteration estimate on the Cholesky path, squared singular value ratio
    /// on the fallback path. Infinite when singular.
    pub condition: f64,
    pub pseudo_inverse: bool,
    /// Unknowns with an identically zero row, fixed at zero.
    pub inactive: usize,
}

/// Minimizes `||t - A g||^2 + g^T P g` given the normal equations
/// `h = A^T A + P`, `rhs = A^T t`.
///
/// Unknowns whose row of `h` is exactly zero (zero-padded rank directions,
/// basis functions no sample reaches) are fixed at zero. The rest is solved
/// by Cholesky when well conditioned; otherwise `stacked` supplies `A` and
/// `t` and the minimum-norm solution comes from an SVD of `[A; sqrt(P)]`.
/// With `current` given, the fallback returns `current` plus the
/// minimum-norm correction instead, so directions below the SVD cutoff keep
/// their values and the cost never rises above that of `current`.
pub fn solve_penalized<F>(
    h: &DMatrix<f64>,
    rhs: &DVector<f64>,
    pen: &DMatrix<f64>,
    current: Option<&DVector<f64>>,
    stacked: F,
) -> Result<(DVector<f64>, SolveInfo)>
where
    F: FnOnce() -> (DMatrix<f64>, DVector<f64>),
{
    if h.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(TnbsError::Numerical("non-finite entries in the normal equations".into()));
    }
    if h.nrows() != h.ncols() || h.nrows() != rhs.len() || pen.shape() != h.shape() {
        return Err(TnbsError::mismatch("normal matrix vs right-hand side", h.nrows(), rhs.len()));
    }
    let n = h.nrows();
    let active: Vec<usize> = (0..n).filter(|&i| h.row(i).iter().any(|&v| v != 0.0)).collect();
    let inactive = n - active.len();
    let mut g = DVector::zeros(n);
    if active.is_empty() {
        return Ok((g, SolveInfo { condition: f64::INFINITY, pseudo_inverse: true, inactive }));
    }
    let m = active.len();
    let sub = |x: &DMatrix<f64>| DMatrix::from_fn(m, m, |i, j| x[(active[i], active[j])]);
    let hr = if inactive == 0 { h.clone() } else { sub(h) };
    let br = DVector::from_fn(m, |i, _| rhs[active[i]]);

    let mut solved = None;
    if let Some(chol) = hr.clone().cholesky() {
        let condition = estimate_condition(&hr, &chol);
        if condition <= CONDITION_LIMIT {
            let x = chol.solve(&br);
            if x.iter().all(|v| v.is_finite()) {
                solved = Some((x, SolveInfo { condition, pseudo_inverse: false, inactive }));
            }
        }
    }
    let (x, info) = match solved {
        Some(s) => s,
        None => {
            let (a, t) = stacked();
            let x0 = current.map(|c| DVector::from_fn(m, |i, _| c[active[i]]));
            let (x, condition) = min_norm_lstsq(&a, &t, &sub(pen), &active, x0.as_ref())?;
            (x, SolveInfo { condition, pseudo_inverse: true, inactive })
        }
    };
    for (i, &a) in active.iter().enumerate() {
        g[a] = x[i];
    }
    Ok((g, info))
}

/// Condition number of an SPD matrix from power iteration on `h` and on its
/// inverse (through the Cholesky factor). Deterministic start vector.
fn estimate_condition(h: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let m = h.nrows();
    let start = DVector::from_fn(m, |i, _| 1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0);
    let mut x = start.normalize();
    let mut hi = 0.0;
    for _ in 0..POWER_STEPS {
        let y = h * &x;
        hi = y.norm();
        if hi == 0.0 {
            return f64::INFINITY;
        }
        x = y / hi;
    }
    let mut x = start.normalize();
    let mut inv = 0.0;
    for _ in 0..POWER_STEPS {
        let y = chol.solve(&x);
        inv = y.norm();
        if !inv.is_finite() {
            return f64::INFINITY;
        }
        x = y / inv;
    }
    hi * inv
}

/// SVD solve of `[A_active; sqrt(P_active)] x = [t; 0]`.
fn min_norm_lstsq(
    a: &DMatrix<f64>,
    t: &DVector<f64>,
    pen: &DMatrix<f64>,
    active: &[usize],
    x0: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, f64)> {
    let m = active.len();
    let (evals, evecs) = crate::linalg::symmetric_eigen(pen)?;
    let pmax = evals.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let roots: Vec<usize> = (0..m).filter(|&i| evals[i] > pmax * f64::EPSILON * m as f64).collect();
    let rows = a.nrows() + roots.len();
    let mut stacked = DMatrix::zeros(rows, m);
    for (j, &c) in active.iter().enumerate() {
        stacked.view_mut((0, j), (a.nrows(), 1)).copy_from(&a.column(c));
    }
    for (r, &i) in roots.iter().enumerate() {
        let s = evals[i].sqrt();
        for j in 0..m {
            stacked[(a.nrows() + r, j)] = s * evecs[(j, i)];
        }
    }
    let mut b = DVector::zeros(rows);
    b.rows_mut(0, t.len()).copy_from(t);
    if let Some(x0) = x0 {
        b -= &stacked * x0;
    }
    let (u, s, vt) = crate::linalg::svd(&stacked)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let tol = smax * f64::EPSILON * rows.max(m) as f64;
    let kept = s.iter().take_while(|&&v| v > tol).count();
    let coeffs = DVector::from_fn(kept, |i, _| u.column(i).dot(&b) / s[i]);
    let mut x = vt.rows(0, kept).tr_mul(&coeffs);
    if let Some(x0) = x0 {
        x += x0;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TnbsError::Numerical("least-squares fallback produced non-finite values".into()));
    }
    let condition = if kept < m { f64::INFINITY } else { (smax / s[kept - 1]).powi(2) };
    Ok((x, condition))
}

/// Penalized least-squares core: minimizes
/// `||y - A g||^2 + sum_j lambda_j g^T Omega_j g`, i.e. solves
/// `(A^T A + sum_j lambda_j Omega_j) g = A^T y`.
pub fn update_core(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    omegas: &[DMatrix<f64>],
    lambdas: &[f64],
) -> Result<(DVector<f64>, SolveInfo)> {
    if a.nrows() != y.len() {
        return Err(TnbsError::mismatch("regression rows vs targets", a.nrows(), y.len()));
    }
    if omegas.len() != lambdas.len() {
        return Err(TnbsError::mismatch("penalty matrices vs lambdas", omegas.len(), lambdas.len()));
    }
    if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(TnbsError::Numerical("non-finite entries in the regression data".into()));
    }
    let mut pen = DMatrix::zeros(a.ncols(), a.ncols());
    for (omega, &lam) in omegas.iter().zip(lambdas) {
        if omega.shape() != pen.shape() {
            return Err(TnbsError::mismatch("penalty matrix size", omega.nrows(), pen.nrows()));
        }
        if lam < 0.0 || !lam.is_finite() {
            return Err(TnbsError::Config(format!("smoothing parameter {lam} must be finite and >= 0")));
        }
        if lam != 0.0 {
            pen += omega * lam;
        }
    }
    let h = a.tr_mul(a) + &pen;
    solve_penalized(&h, &a.tr_mul(y), &pen, None, || (a.clone(), y.clone()))
}
