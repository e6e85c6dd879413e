use nalgebra::DMatrix;

use super::dense::{checked_count, DenseTensor, DENSE_ELEMENT_CAP};
use crate::error::{Result, TnbsError};

/// Tensor train: a chain of third-order cores `(r_{p-1}, k_p, r_p)` with
/// `r_0 = r_d = 1`. Sites are 0-based.
///
/// When `canonical_site` is `Some(s)`, cores `0..s` are left-orthogonal and
/// cores `s+1..d` right-orthogonal. An interior rank larger than what the
/// neighbouring extents can support is kept at its configured size; the
/// surplus directions are carried as exact zeros and the corresponding core
/// unfolding is orthogonal on its non-zero part only.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<DenseTensor>,
    canonical_site: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    Left,
    Right,
}

/// How [`tt_svd`] truncates each unfolding.
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// Keep every non-zero singular value.
    Exact,
    /// Per-interface caps `(r_1, ..., r_{d-1})`.
    MaxRanks(Vec<usize>),
    /// Relative Frobenius accuracy of the whole train; each of the `d-1`
    /// unfoldings gets `tol / sqrt(d-1)`.
    RelTolerance(f64),
}

impl TensorTrain {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TnbsError::InvalidShape("tensor train needs at least one core".into()));
        }
        for (p, core) in cores.iter().enumerate() {
            if core.order() != 3 {
                return Err(TnbsError::InvalidShape(format!(
                    "core {p} has order {}, expected 3",
                    core.order()
                )));
            }
        }
        if cores[0].shape()[0] != 1 {
            return Err(TnbsError::mismatch("first rank r_0", cores[0].shape()[0], 1));
        }
        if cores[cores.len() - 1].shape()[2] != 1 {
            return Err(TnbsError::mismatch("last rank r_d", cores[cores.len() - 1].shape()[2], 1));
        }
        for p in 1..cores.len() {
            let (left, right) = (cores[p - 1].shape()[2], cores[p].shape()[0]);
            if left != right {
                return Err(TnbsError::mismatch("connecting rank between adjacent cores", left, right));
            }
        }
        // A single core has no neighbours to orthogonalize.
        let canonical_site = (cores.len() == 1).then_some(0);
        Ok(Self { cores, canonical_site })
    }

    /// Cores of the given extents and interior ranks filled by `f(p, linear index)`.
    pub fn from_fn(extents: &[usize], ranks: &[usize], mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let d = extents.len();
        if d == 0 || ranks.len() + 1 != d {
            return Err(TnbsError::Config(format!(
                "{} interior ranks given for {} cores (need d-1)",
                ranks.len(),
                d
            )));
        }
        if ranks.contains(&0) || extents.contains(&0) {
            return Err(TnbsError::Config("ranks and extents must be positive".into()));
        }
        let full_ranks = full_rank_vector(ranks);
        let cores = (0..d)
            .map(|p| {
                let shape = vec![full_ranks[p], extents[p], full_ranks[p + 1]];
                let n = shape.iter().product();
                DenseTensor::new(shape, (0..n).map(|i| f(p, i)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, p: usize) -> &DenseTensor {
        &self.cores[p]
    }

    pub fn canonical_site(&self) -> Option<usize> {
        self.canonical_site
    }

    /// `(r_0, ..., r_d)`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.shape()[0]).collect();
        r.push(1);
        r
    }

    pub fn extents(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Number of stored weights.
    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    /// Replaces the values of core `p` (same shape). Clears the canonical
    /// marker unless `p` is the canonical site, whose update never breaks
    /// the orthogonality of the other cores.
    pub fn set_core_values(&mut self, p: usize, values: &[f64]) -> Result<()> {
        let core = &mut self.cores[p];
        if values.len() != core.len() {
            return Err(TnbsError::mismatch("core value count", values.len(), core.len()));
        }
        core.values_mut().copy_from_slice(values);
        if self.canonical_site != Some(p) {
            self.canonical_site = None;
        }
        Ok(())
    }

    /// Dense tensor represented by the train, refused above `cap` elements.
    pub fn to_full_capped(&self, cap: usize) -> Result<DenseTensor> {
        let extents = self.extents();
        let elements = checked_count(&extents)?;
        if elements > cap {
            return Err(TnbsError::CapExceeded { elements, cap });
        }
        // Running left-to-right product as a (k_1...k_p) x r_p matrix.
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for core in &self.cores {
            let (r0, k, r1) = dims(core);
            let right = DMatrix::from_column_slice(r0, k * r1, core.values());
            let prod = &acc * right; // (n x r0)(r0 x k r1) = n x (k r1)
            // Columns are ordered (i_p fast, beta slow); fold i_p into rows.
            let n = acc.nrows();
            acc = DMatrix::from_column_slice(n * k, r1, prod.as_slice());
        }
        DenseTensor::new(extents, acc.as_slice().to_vec())
    }

    pub fn to_full(&self) -> Result<DenseTensor> {
        self.to_full_capped(DENSE_ELEMENT_CAP)
    }

    /// Frobenius norm of the represented tensor without forming it.
    pub fn norm(&self) -> f64 {
        let mut gram = DMatrix::from_element(1, 1, 1.0);
        for core in &self.cores {
            gram = left_transfer(&gram, core, None);
        }
        gram[(0, 0)].max(0.0).sqrt()
    }

    /// Brings the train to site-`s` mixed-canonical form.
    pub fn orthogonalize_to_site(&self, s: usize) -> Result<TensorTrain> {
        let d = self.order();
        if s >= d {
            return Err(TnbsError::Config(format!("site {s} out of range for {d} cores")));
        }
        let mut tt = self.clone();
        for p in 0..s {
            tt.move_right(p);
        }
        for p in (s + 1..d).rev() {
            tt.move_left(p);
        }
        tt.canonical_site = Some(s);
        Ok(tt)
    }

    /// QR core shift used between ALS updates: for `Right`, core `p` becomes
    /// left-orthogonal and `R` is absorbed into core `p+1`; `Left` mirrors it
    /// with an LQ step into core `p-1`.
    pub fn shift_core(&self, p: usize, direction: ShiftDirection) -> Result<TensorTrain> {
        let mut tt = self.clone();
        tt.shift_core_in_place(p, direction)?;
        Ok(tt)
    }

    pub fn shift_core_in_place(&mut self, p: usize, direction: ShiftDirection) -> Result<()> {
        if self.canonical_site != Some(p) {
            return Err(TnbsError::CanonicalSite { expected: p, found: self.canonical_site });
        }
        let d = self.order();
        match direction {
            ShiftDirection::Right => {
                if p + 1 >= d {
                    return Err(TnbsError::Config(format!("cannot shift right past the last core ({p})")));
                }
                self.move_right(p);
                self.canonical_site = Some(p + 1);
            }
            ShiftDirection::Left => {
                if p == 0 {
                    return Err(TnbsError::Config("cannot shift left past the first core".into()));
                }
                self.move_left(p);
                self.canonical_site = Some(p - 1);
            }
        }
        Ok(())
    }

    fn move_right(&mut self, p: usize) {
        let (r0, k, r1) = dims(&self.cores[p]);
        let m = DMatrix::from_column_slice(r0 * k, r1, self.cores[p].values());
        let (q, r) = qr_positive(&m);
        self.cores[p].values_mut().copy_from_slice(q.as_slice());
        let (_, k2, r2) = dims(&self.cores[p + 1]);
        let next = DMatrix::from_column_slice(r1, k2 * r2, self.cores[p + 1].values());
        let merged = r * next;
        self.cores[p + 1].values_mut().copy_from_slice(merged.as_slice());
    }

    fn move_left(&mut self, p: usize) {
        let (r0, k, r1) = dims(&self.cores[p]);
        let m = DMatrix::from_column_slice(r0, k * r1, self.cores[p].values());
        let (q, r) = qr_positive(&m.transpose());
        // m = r^T q^T
        self.cores[p].values_mut().copy_from_slice(q.transpose().as_slice());
        let (rp, kp, _) = dims(&self.cores[p - 1]);
        let prev = DMatrix::from_column_slice(rp * kp, r0, self.cores[p - 1].values());
        let merged = prev * r.transpose();
        self.cores[p - 1].values_mut().copy_from_slice(merged.as_slice());
    }
}

/// TT-SVD: successive truncated SVDs of the unfoldings. The result is
/// canonical at the last site.
pub fn tt_svd(a: &DenseTensor, truncation: &Truncation) -> Result<TensorTrain> {
    let extents = a.shape().to_vec();
    let d = extents.len();
    let caps: Vec<usize> = match truncation {
        Truncation::MaxRanks(r) => {
            if r.len() + 1 != d {
                return Err(TnbsError::Config(format!(
                    "{} rank caps given for order {d} (need d-1)",
                    r.len()
                )));
            }
            if r.contains(&0) {
                return Err(TnbsError::Config("rank caps must be positive".into()));
            }
            r.clone()
        }
        _ => vec![usize::MAX; d.saturating_sub(1)],
    };
    let delta = match truncation {
        Truncation::RelTolerance(tol) => {
            if !(*tol >= 0.0) {
                return Err(TnbsError::Config(format!("relative tolerance {tol} must be >= 0")));
            }
            if d > 1 {
                tol / ((d - 1) as f64).sqrt() * a.frobenius_norm()
            } else {
                0.0
            }
        }
        _ => 0.0,
    };

    let mut cores = Vec::with_capacity(d);
    let mut r_prev = 1;
    let mut rest = a.values().to_vec();
    for p in 0..d.saturating_sub(1) {
        let rows = r_prev * extents[p];
        let cols = rest.len() / rows;
        let c = DMatrix::from_column_slice(rows, cols, &rest);
        let (u, s, vt) = crate::linalg::svd(&c)?;
        let mut rank = s.iter().filter(|&&x| x > s[0] * 1e-14 * (rows.max(cols) as f64)).count().max(1);
        if delta > 0.0 {
            // Smallest rank whose discarded tail stays within delta.
            let mut tail = 0.0;
            let mut keep = s.len();
            while keep > 1 && (tail + s[keep - 1] * s[keep - 1]).sqrt() <= delta {
                tail += s[keep - 1] * s[keep - 1];
                keep -= 1;
            }
            rank = rank.min(keep);
        }
        rank = rank.min(caps[p]);
        let u_r = u.columns(0, rank).into_owned();
        cores.push(DenseTensor::new(vec![r_prev, extents[p], rank], u_r.as_slice().to_vec())?);
        let mut sv = vt.rows(0, rank).into_owned();
        for i in 0..rank {
            sv.row_mut(i).scale_mut(s[i]);
        }
        rest = sv.as_slice().to_vec();
        r_prev = rank;
    }
    cores.push(DenseTensor::new(vec![r_prev, extents[d - 1], 1], rest)?);
    let mut tt = TensorTrain::new(cores)?;
    tt.canonical_site = Some(d - 1);
    Ok(tt)
}

pub(crate) fn dims(core: &DenseTensor) -> (usize, usize, usize) {
    let s = core.shape();
    (s[0], s[1], s[2])
}

pub(crate) fn full_rank_vector(interior: &[usize]) -> Vec<usize> {
    let mut r = Vec::with_capacity(interior.len() + 2);
    r.push(1);
    r.extend_from_slice(interior);
    r.push(1);
    r
}

/// QR with non-negative `diag(R)`, shaped so that `Q` is `m x n` and `R` is
/// `n x n` even when `m < n`; the surplus columns of `Q` and rows of `R` are
/// zero.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..rows.min(cols) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    if rows >= cols {
        (q, r)
    } else {
        let mut q_pad = DMatrix::zeros(rows, cols);
        q_pad.columns_mut(0, rows).copy_from(&q);
        let mut r_pad = DMatrix::zeros(cols, cols);
        r_pad.rows_mut(0, rows).copy_from(&r);
        (q_pad, r_pad)
    }
}

/// One step of the left Gram chain:
/// `E'[b, b'] = sum_{a,a',i,i'} E[a,a'] M[i,i'] G[a,i,b] G[a',i',b']`
/// with `M = I` when `insert` is `None`.
pub(crate) fn left_transfer(e: &DMatrix<f64>, core: &DenseTensor, insert: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let (r0, k, r1) = dims(core);
    let slices: Vec<DMatrix<f64>> = (0..k).map(|i| core_slice(core, i)).collect();
    let mut out = DMatrix::zeros(r1, r1);
    match insert {
        None => {
            for g in &slices {
                out += g.transpose() * e * g;
            }
        }
        Some(m) => {
            let eg: Vec<DMatrix<f64>> = slices.iter().map(|g| e * g).collect();
            for i in 0..k {
                for j in 0..k {
                    let w = m[(i, j)];
                    if w != 0.0 {
                        out += (slices[i].transpose() * &eg[j]) * w;
                    }
                }
            }
        }
    }
    debug_assert_eq!(e.nrows(), r0);
    out
}

/// Mirror of [`left_transfer`] running from the right end of the train.
pub(crate) fn right_transfer(e: &DMatrix<f64>, core: &DenseTensor, insert: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let (r0, k, _) = dims(core);
    let slices: Vec<DMatrix<f64>> = (0..k).map(|i| core_slice(core, i)).collect();
    let mut out = DMatrix::zeros(r0, r0);
    match insert {
        None => {
            for g in &slices {
                out += g * e * g.transpose();
            }
        }
        Some(m) => {
            let ge: Vec<DMatrix<f64>> = slices.iter().map(|g| g * e).collect();
            for i in 0..k {
                for j in 0..k {
                    let w = m[(i, j)];
                    if w != 0.0 {
                        out += (&ge[i] * slices[j].transpose()) * w;
                    }
                }
            }
        }
    }
    out
}

/// The `r0 x r1` matrix `G[:, i, :]`.
pub(crate) fn core_slice(core: &DenseTensor, i: usize) -> DMatrix<f64> {
    let (r0, k, r1) = dims(core);
    let v = core.values();
    DMatrix::from_fn(r0, r1, |a, b| v[a + r0 * (i + k * b)])
}

/// Left unfolding `(r0 k) x r1` of a core.
pub fn left_unfolding(core: &DenseTensor) -> DMatrix<f64> {
    let (r0, k, r1) = dims(core);
    DMatrix::from_column_slice(r0 * k, r1, core.values())
}

/// Right unfolding `r0 x (k r1)` of a core.
pub fn right_unfolding(core: &DenseTensor) -> DMatrix<f64> {
    let (r0, k, r1) = dims(core);
    DMatrix::from_column_slice(r0, k * r1, core.values())
}
