#![allow(dead_code)]

use nalgebra::DMatrix;
use tnbs_core::als::{dense_penalty, difference_matrix};
use tnbs_core::bspline::BasisConfig;
use tnbs_core::model::Regressors;
use tnbs_core::tensor::{DenseTensor, TensorTrain};

/// Textbook Cox-de Boor recursion on the raw knot vector, with the last
/// interval of the natural domain closed on the right.
pub fn naive_basis(cfg: &BasisConfig, x: f64) -> Vec<f64> {
    let t = cfg.knots();
    let rho = cfg.degree();
    let last = cfg.knot_param() - rho - 1;
    fn b(t: &[f64], i: usize, p: usize, x: f64, last: usize) -> f64 {
        if p == 0 {
            let inside = t[i] <= x && x < t[i + 1];
            let right_end = i == last && x == t[i + 1];
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + p] - t[i];
        if d1 != 0.0 {
            v += (x - t[i]) / d1 * b(t, i, p - 1, x, last);
        }
        let d2 = t[i + p + 1] - t[i + 1];
        if d2 != 0.0 {
            v += (t[i + p + 1] - x) / d2 * b(t, i + 1, p - 1, x, last);
        }
        v
    }
    (0..cfg.basis_count()).map(|i| b(t, i, rho, x, last)).collect()
}

/// Kronecker product by explicit index loops.
pub fn kron_loops(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `sum_{i_1..i_d} W[i] prod_p b_p[i_p]` over every multi-index.
pub fn dense_surface(w: &DenseTensor, bases: &[Vec<f64>]) -> f64 {
    let shape = w.shape().to_vec();
    let mut idx = vec![0usize; shape.len()];
    let mut total = 0.0;
    for lin in 0..w.len() {
        let mut prod = w.values()[lin];
        for (p, &i) in idx.iter().enumerate() {
            prod *= bases[p][i];
        }
        total += prod;
        for (p, e) in shape.iter().enumerate() {
            idx[p] += 1;
            if idx[p] < *e {
                break;
            }
            idx[p] = 0;
        }
    }
    total
}

/// Regularized objective of a model on scaled regressors, computed from the
/// dense weight tensor.
pub fn dense_objective(tt: &TensorTrain, basis: &BasisConfig, reg: &Regressors, alpha: usize, lambdas: &[f64]) -> f64 {
    let full = tt.to_full().unwrap();
    let mut sse = 0.0;
    for i in 0..reg.len() {
        let bases: Vec<Vec<f64>> = reg.row(i).iter().map(|&x| naive_basis(basis, x.clamp(0.0, 1.0))).collect();
        let e = reg.targets[i] - dense_surface(&full, &bases);
        sse += e * e;
    }
    let d = difference_matrix(basis.basis_count(), alpha).unwrap();
    let pen: f64 = lambdas
        .iter()
        .enumerate()
        .map(|(j, l)| l * dense_penalty(&full, &d, j).unwrap())
        .sum();
    sse + pen
}

/// Deterministic smooth-ish test signals in `[0, 1]`.
pub fn signals(n: usize, phase: f64) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (0..n)
        .map(|t| 0.5 + 0.3 * ((t as f64) * 0.23 + phase).sin() + 0.15 * ((t as f64) * 0.071).cos())
        .collect();
    let mut y = vec![0.2; n];
    for t in 2..n {
        y[t] = 0.5 * y[t - 1] - 0.1 * y[t - 2] + 0.4 * u[t - 1] * u[t - 1] + 0.1 * (3.0 * u[t - 2]).sin();
    }
    (u, y)
}
