//! Difference penalties on the weight tensor and their restriction to a
//! single TT core.
//!
//! For the site-`p` canonical train the penalty along dimension `j` is the
//! quadratic form `g^T (C_> (x) C_- (x) C_<) g` in the vectorized core `g`.
//! Only one factor differs from the identity: `C_- = D^T D` when `j == p`,
//! the left Gram chain with `D^T D` inserted at core `j` when `j < p`, and
//! the mirrored right chain when `j > p`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TnbsError};
use crate::tensor::{dims, left_transfer, right_transfer, DenseTensor, TensorTrain};

/// `(k - alpha) x k` matrix applying the `alpha`-th forward difference.
pub fn difference_matrix(k: usize, alpha: usize) -> Result<DMatrix<f64>> {
    if alpha >= k {
        return Err(TnbsError::Config(format!(
            "difference order {alpha} must be smaller than the basis count {k}"
        )));
    }
    let mut d = DMatrix::<f64>::identity(k, k);
    for _ in 0..alpha {
        let rows = d.nrows() - 1;
        d = DMatrix::from_fn(rows, k, |i, j| d[(i, j)] - d[(i + 1, j)]);
    }
    Ok(d)
}

/// `|| W x_j D ||^2` on a dense tensor (oracle path).
pub fn dense_penalty(w: &DenseTensor, d: &DMatrix<f64>, j: usize) -> Result<f64> {
    let diff = w.mode_product(d, j)?;
    Ok(diff.values().iter().map(|v| v * v).sum())
}

fn check_site(tt: &TensorTrain, p: usize) -> Result<()> {
    if tt.canonical_site() != Some(p) {
        return Err(TnbsError::CanonicalSite { expected: p, found: tt.canonical_site() });
    }
    Ok(())
}

fn check_d(tt: &TensorTrain, d: &DMatrix<f64>) -> Result<()> {
    for k in tt.extents() {
        if k != d.ncols() {
            return Err(TnbsError::mismatch("difference matrix columns vs core extent", d.ncols(), k));
        }
    }
    Ok(())
}

/// The penalty matrix for core `p` and dimension `j`, assembled explicitly.
pub fn build_omega(tt: &TensorTrain, d: &DMatrix<f64>, p: usize, j: usize) -> Result<DMatrix<f64>> {
    check_site(tt, p)?;
    check_d(tt, d)?;
    if j >= tt.order() {
        return Err(TnbsError::Config(format!("penalty dimension {j} out of range")));
    }
    let mut lambdas = vec![0.0; tt.order()];
    lambdas[j] = 1.0;
    Ok(PenaltyBlocks::new(tt, &(d.transpose() * d), p, &lambdas)?.to_matrix())
}

/// `sum_j lambda_j Omega_j` for one core in factored form:
/// `I (x) I (x) left + I (x) mid (x) I + right (x) I (x) I`.
#[derive(Debug, Clone)]
pub struct PenaltyBlocks {
    pub left: DMatrix<f64>,
    pub mid: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl PenaltyBlocks {
    /// `dtd` is `D^T D`. Requires the train to be canonical at `p`.
    pub fn new(tt: &TensorTrain, dtd: &DMatrix<f64>, p: usize, lambdas: &[f64]) -> Result<Self> {
        check_site(tt, p)?;
        let d = tt.order();
        if lambdas.len() != d {
            return Err(TnbsError::mismatch("lambda count vs dimension", lambdas.len(), d));
        }
        let (r0, k, r1) = dims(tt.core(p));
        if dtd.shape() != (k, k) {
            return Err(TnbsError::mismatch("penalty matrix size vs core extent", dtd.nrows(), k));
        }

        // Left cores are orthogonal, so the plain chain up to core q is the
        // identity; the penalty enters at q and is carried to p.
        let mut left = DMatrix::zeros(1, 1);
        for q in 0..p {
            let core = tt.core(q);
            let mut next = left_transfer(&left, core, None);
            if lambdas[q] != 0.0 {
                let eye = DMatrix::identity(dims(core).0, dims(core).0);
                next += left_transfer(&eye, core, Some(dtd)) * lambdas[q];
            }
            left = next;
        }
        let mut right = DMatrix::zeros(1, 1);
        for q in (p + 1..d).rev() {
            let core = tt.core(q);
            let mut next = right_transfer(&right, core, None);
            if lambdas[q] != 0.0 {
                let eye = DMatrix::identity(dims(core).2, dims(core).2);
                next += right_transfer(&eye, core, Some(dtd)) * lambdas[q];
            }
            right = next;
        }
        debug_assert_eq!(left.shape(), (r0, r0));
        debug_assert_eq!(right.shape(), (r1, r1));
        Ok(Self { left, mid: dtd * lambdas[p], right })
    }

    pub fn dim(&self) -> usize {
        self.left.nrows() * self.mid.nrows() * self.right.nrows()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let (r0, k, r1) = (self.left.nrows(), self.mid.nrows(), self.right.nrows());
        let i0 = DMatrix::identity(r0, r0);
        let ik = DMatrix::identity(k, k);
        let i1 = DMatrix::identity(r1, r1);
        i1.kronecker(&ik).kronecker(&self.left)
            + i1.kronecker(&self.mid).kronecker(&i0)
            + self.right.kronecker(&ik).kronecker(&i0)
    }

    /// Adds the penalty matrix onto `h` without forming the Kronecker
    /// products.
    pub fn add_to(&self, h: &mut DMatrix<f64>) {
        let (r0, k, r1) = (self.left.nrows(), self.mid.nrows(), self.right.nrows());
        let idx = |a: usize, i: usize, b: usize| a + r0 * (i + k * b);
        for b in 0..r1 {
            for i in 0..k {
                for a in 0..r0 {
                    let row = idx(a, i, b);
                    for a2 in 0..r0 {
                        h[(row, idx(a2, i, b))] += self.left[(a, a2)];
                    }
                    for i2 in 0..k {
                        h[(row, idx(a, i2, b))] += self.mid[(i, i2)];
                    }
                    for b2 in 0..r1 {
                        h[(row, idx(a, i, b2))] += self.right[(b, b2)];
                    }
                }
            }
        }
    }

    pub fn quadratic(&self, g: &DVector<f64>) -> f64 {
        let (r0, k, r1) = (self.left.nrows(), self.mid.nrows(), self.right.nrows());
        let mut h = DMatrix::zeros(self.dim(), self.dim());
        self.add_to(&mut h);
        debug_assert_eq!(g.len(), r0 * k * r1);
        g.dot(&(h * g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn difference_matrices() {
        let d1 = difference_matrix(3, 1).unwrap();
        assert_eq!(d1, DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]));
        assert_eq!(difference_matrix(4, 0).unwrap(), DMatrix::identity(4, 4));
        let d2 = difference_matrix(4, 2).unwrap();
        assert_eq!(d2, DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 1.0, 0.0, 0.0, 1.0, -2.0, 1.0]));
        assert!(difference_matrix(3, 3).is_err());
    }

    #[test]
    fn dense_penalty_cases() {
        let d1 = difference_matrix(3, 1).unwrap();
        let c = DenseTensor::from_fn(vec![3, 3], |_| 2.0).unwrap();
        assert_eq!(dense_penalty(&c, &d1, 0).unwrap(), 0.0);
        let w = DenseTensor::new(vec![3], vec![1.0, 4.0, 2.0]).unwrap();
        assert_eq!(dense_penalty(&w, &d1, 0).unwrap(), 9.0 + 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DenseTensor::from_fn(vec![3, 4, 3], |_| rng.random_range(-1.0..1.0)).unwrap();
        for (j, k) in [(0usize, 3usize), (1, 4), (2, 3)] {
            let d = difference_matrix(k, 1).unwrap();
            let mut s = 0.0;
            // Explicit loop over the fibres along mode j.
            for a in 0..3 {
                for b in 0..if j == 1 { 3 } else { 4 } {
                    for r in 0..k - 1 {
                        let idx = |t: usize| match j {
                            0 => [t, b, a],
                            1 => [a, t, b],
                            _ => [a, b, t],
                        };
                        let diff = w.get(&idx(r)) - w.get(&idx(r + 1));
                        s += diff * diff;
                    }
                }
            }
            assert!((dense_penalty(&w, &d, j).unwrap() - s).abs() < 1e-12);
        }
        let d = difference_matrix(5, 1).unwrap();
        assert!(dense_penalty(&w, &d, 0).is_err());
    }

    #[test]
    fn omega_same_site_is_kron_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tt = TensorTrain::from_fn(&[4, 4, 4], &[2, 3], |_, _| rng.random_range(-1.0..1.0))
            .unwrap()
            .orthogonalize_to_site(1)
            .unwrap();
        let d = difference_matrix(4, 1).unwrap();
        let omega = build_omega(&tt, &d, 1, 1).unwrap();
        let expect = DMatrix::<f64>::identity(3, 3)
            .kronecker(&(d.transpose() * &d))
            .kronecker(&DMatrix::<f64>::identity(2, 2));
        assert!((omega - expect).abs().max() < 1e-14);

        let eye = difference_matrix(4, 0).unwrap();
        let omega = build_omega(&tt, &eye, 1, 1).unwrap();
        let g = DVector::from_column_slice(tt.core(1).values());
        assert!((g.dot(&(omega * &g)) - g.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn add_to_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tt = TensorTrain::from_fn(&[3, 3, 3, 3], &[2, 3, 2], |_, _| rng.random_range(-1.0..1.0))
            .unwrap()
            .orthogonalize_to_site(2)
            .unwrap();
        let d = difference_matrix(3, 1).unwrap();
        let blocks = PenaltyBlocks::new(&tt, &(d.transpose() * &d), 2, &[0.3, 1.2, 0.7, 2.0]).unwrap();
        let mut h = DMatrix::zeros(blocks.dim(), blocks.dim());
        blocks.add_to(&mut h);
        assert!((h - blocks.to_matrix()).abs().max() < 1e-13);
    }

    #[test]
    fn requires_canonical_site() {
        let tt = TensorTrain::from_fn(&[3, 3], &[2], |_, _| 1.0).unwrap();
        let d = difference_matrix(3, 1).unwrap();
        assert!(matches!(build_omega(&tt, &d, 0, 0), Err(TnbsError::CanonicalSite { .. })));
    }
}
