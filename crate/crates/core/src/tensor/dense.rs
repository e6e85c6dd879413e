use nalgebra::DMatrix;

use crate::error::{Result, TnbsError};

/// Default element cap for dense (oracle/debug) tensors.
pub const DENSE_ELEMENT_CAP: usize = 10_000_000;

/// A d-way array of reals stored with the first index varying fastest.
///
/// Element `(i_1, ..., i_d)` (0-based) lives at linear index
/// `i_1 + i_2 k_1 + ... + i_d k_1 ... k_{d-1}`. This is also the column-major
/// layout of nalgebra, so unfoldings are free reinterpretations of the
/// value buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(TnbsError::InvalidShape("tensor order must be at least 1".into()));
        }
        if shape.contains(&0) {
            return Err(TnbsError::InvalidShape(format!("zero extent in shape {shape:?}")));
        }
        let count = checked_count(&shape)?;
        if count != values.len() {
            return Err(TnbsError::mismatch("element count vs product(shape)", values.len(), count));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let count = checked_count(&shape)?;
        Self::new(shape, vec![0.0; count])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        let mut idx = vec![0usize; t.shape.len()];
        for lin in 0..t.values.len() {
            t.values[lin] = f(&idx);
            increment(&mut idx, &t.shape);
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The vectorization of the tensor.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn vectorize(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &k) in idx.iter().zip(&self.shape) {
            debug_assert!(i < k);
            lin += i * stride;
            stride *= k;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.values[lin] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Matricization with modes `0..split` as rows and the rest as columns.
    pub fn unfold(&self, split: usize) -> DMatrix<f64> {
        let rows: usize = self.shape[..split].iter().product();
        let cols = self.values.len() / rows;
        DMatrix::from_column_slice(rows, cols, &self.values)
    }

    /// Same data, different shape; the vectorization is unchanged.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.values)
    }

    /// Contracts mode `mode_a` of `self` with mode `mode_b` of `other`
    /// (0-based). The result keeps the remaining modes of `self` followed by
    /// the remaining modes of `other`; when both tensors reduce to nothing the
    /// result is a 1-element tensor. Singleton contractions give the outer
    /// product.
    pub fn contract(&self, other: &DenseTensor, mode_a: usize, mode_b: usize) -> Result<DenseTensor> {
        if mode_a >= self.order() {
            return Err(TnbsError::InvalidShape(format!(
                "mode {mode_a} out of range for order {}",
                self.order()
            )));
        }
        if mode_b >= other.order() {
            return Err(TnbsError::InvalidShape(format!(
                "mode {mode_b} out of range for order {}",
                other.order()
            )));
        }
        let n = self.shape[mode_a];
        if n != other.shape[mode_b] {
            return Err(TnbsError::mismatch("contracted extents", n, other.shape[mode_b]));
        }
        let (pre_a, post_a) = split_sizes(&self.shape, mode_a);
        let (pre_b, post_b) = split_sizes(&other.shape, mode_b);
        let rest_a = pre_a * post_a;
        let rest_b = pre_b * post_b;

        // A as (rest_a x n) and B as (n x rest_b) after moving the contracted
        // mode; the product is the column-major result.
        let mut a_mat = DMatrix::zeros(rest_a, n);
        for ip in 0..post_a {
            for j in 0..n {
                for i in 0..pre_a {
                    a_mat[(i + pre_a * ip, j)] = self.values[i + pre_a * (j + n * ip)];
                }
            }
        }
        let mut b_mat = DMatrix::zeros(n, rest_b);
        for ip in 0..post_b {
            for j in 0..n {
                for i in 0..pre_b {
                    b_mat[(j, i + pre_b * ip)] = other.values[i + pre_b * (j + n * ip)];
                }
            }
        }
        let c = a_mat * b_mat;

        let mut shape: Vec<usize> = self
            .shape
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode_a)
            .map(|(_, &k)| k)
            .chain(
                other
                    .shape
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != mode_b)
                    .map(|(_, &k)| k),
            )
            .collect();
        if shape.is_empty() {
            shape.push(1);
        }
        DenseTensor::new(shape, c.as_slice().to_vec())
    }

    /// Mode-`mode` product with a matrix `m` of shape `(rows x k_mode)`: the
    /// contracted mode is replaced in place by an extent of `rows`.
    pub fn mode_product(&self, m: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
        if mode >= self.order() {
            return Err(TnbsError::InvalidShape(format!(
                "mode {mode} out of range for order {}",
                self.order()
            )));
        }
        let k = self.shape[mode];
        if m.ncols() != k {
            return Err(TnbsError::mismatch("matrix columns vs tensor extent", m.ncols(), k));
        }
        let (pre, post) = split_sizes(&self.shape, mode);
        let rows = m.nrows();
        let mut out = vec![0.0; pre * rows * post];
        for ip in 0..post {
            for j in 0..k {
                let src = &self.values[pre * (j + k * ip)..pre * (j + 1 + k * ip)];
                for r in 0..rows {
                    let c = m[(r, j)];
                    if c == 0.0 {
                        continue;
                    }
                    let dst = &mut out[pre * (r + rows * ip)..pre * (r + 1 + rows * ip)];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = rows;
        DenseTensor::new(shape, out)
    }
}

/// Sum of entry-wise products of two equally shaped tensors.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.shape != b.shape {
        return Err(TnbsError::InvalidShape(format!(
            "inner product of shapes {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

pub(crate) fn checked_count(shape: &[usize]) -> Result<usize> {
    shape.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k)).ok_or_else(|| {
        TnbsError::InvalidShape(format!("element count of {shape:?} overflows"))
    })
}

fn split_sizes(shape: &[usize], mode: usize) -> (usize, usize) {
    (shape[..mode].iter().product(), shape[mode + 1..].iter().product())
}

/// Advances a multi-index in vectorization order.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &k) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < k {
            return;
        }
        *i = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(shape: Vec<usize>) -> DenseTensor {
        let n = checked_count(&shape).unwrap();
        DenseTensor::new(shape, (0..n).map(|v| (v as f64).sin()).collect()).unwrap()
    }

    #[test]
    fn vectorize_matrix_column_major() {
        let mut a = DenseTensor::zeros(vec![2, 2]).unwrap();
        a.set(&[0, 0], 1.0);
        a.set(&[1, 0], 2.0);
        a.set(&[0, 1], 3.0);
        a.set(&[1, 1], 4.0);
        assert_eq!(a.vectorize(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn vectorize_vector_is_identity() {
        let v = DenseTensor::new(vec![3], vec![5.0, 6.0, 7.0]).unwrap();
        assert_eq!(v.vectorize(), vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn vectorize_index_formula_brute_force() {
        let a = DenseTensor::from_fn(vec![2, 3, 2], |i| (100 * i[0] + 10 * i[1] + i[2]) as f64).unwrap();
        let v = a.vectorize();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    let lin = i + j * 2 + k * 2 * 3;
                    assert_eq!(v[lin], (100 * i + 10 * j + k) as f64);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(matches!(
            DenseTensor::new(vec![2, 2], vec![1.0; 3]),
            Err(TnbsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn contract_identity_with_vector() {
        let eye = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = DenseTensor::new(vec![2], vec![3.0, 4.0]).unwrap();
        let c = eye.contract(&v, 1, 0).unwrap();
        assert_eq!(c.shape(), &[2]);
        assert_eq!(c.values(), &[3.0, 4.0]);
    }

    #[test]
    fn contract_singletons_is_outer_product() {
        let a = DenseTensor::new(vec![1, 1], vec![2.0]).unwrap();
        let b = DenseTensor::new(vec![1, 1], vec![5.0]).unwrap();
        let c = a.contract(&b, 1, 0).unwrap();
        assert_eq!(c.values(), &[10.0]);
    }

    #[test]
    fn contract_matches_quadruple_loop() {
        let a = seq(vec![2, 3, 4]);
        let b = DenseTensor::new(vec![4, 2, 5], (0..40).map(|v| (v as f64 * 0.37).cos()).collect()).unwrap();
        let c = a.contract(&b, 2, 0).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2, 5]);
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i4 in 0..2 {
                    for i5 in 0..5 {
                        let mut s = 0.0;
                        for i3 in 0..4 {
                            s += a.get(&[i1, i2, i3]) * b.get(&[i3, i4, i5]);
                        }
                        assert!((c.get(&[i1, i2, i4, i5]) - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn contract_extent_mismatch_names_both() {
        let a = seq(vec![2, 3]);
        let b = seq(vec![4, 2]);
        let err = a.contract(&b, 1, 0).unwrap_err();
        assert_eq!(err, TnbsError::mismatch("contracted extents", 3, 4));
        assert!(err.to_string().contains("3 vs 4"));
    }

    #[test]
    fn inner_cases() {
        let a = seq(vec![3, 3, 3]);
        let z = DenseTensor::zeros(vec![3, 3, 3]).unwrap();
        assert_eq!(inner(&a, &z).unwrap(), 0.0);
        let eye = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(inner(&eye, &eye).unwrap(), 2.0);
        let b = DenseTensor::from_fn(vec![3, 3, 3], |i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 - 4.0).unwrap();
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    s += a.get(&[i, j, k]) * b.get(&[i, j, k]);
                }
            }
        }
        assert!((inner(&a, &b).unwrap() - s).abs() < 1e-12);
        assert!((inner(&a, &a).unwrap() - a.frobenius_norm().powi(2)).abs() < 1e-12);
        assert!(inner(&a, &eye).is_err());
    }

    #[test]
    fn mode_product_matches_repeated_leading_contraction() {
        // Contracting the leading mode d times with matrices (as second
        // index) rotates modes back to their original positions.
        let a = seq(vec![2, 3, 2]);
        let c: Vec<DMatrix<f64>> = [(4, 2), (2, 3), (3, 2)]
            .iter()
            .enumerate()
            .map(|(s, &(r, k))| DMatrix::from_fn(r, k, |i, j| ((i * 7 + j * 3 + s) as f64).sin()))
            .collect();
        let mut via_mode = a.clone();
        for (p, m) in c.iter().enumerate() {
            via_mode = via_mode.mode_product(m, p).unwrap();
        }
        let mut via_contract = a.clone();
        for m in &c {
            let mt = DenseTensor::new(vec![m.nrows(), m.ncols()], m.as_slice().to_vec()).unwrap();
            via_contract = via_contract.contract(&mt, 0, 1).unwrap();
        }
        assert_eq!(via_mode.shape(), via_contract.shape());
        for (x, y) in via_mode.values().iter().zip(via_contract.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
