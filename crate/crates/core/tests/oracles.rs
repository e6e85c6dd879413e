mod common;

use common::{dense_surface, naive_basis};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnbs_core::als::{build_a, build_omega, dense_penalty, difference_matrix, update_core, PenaltyBlocks};
use tnbs_core::bspline::BasisConfig;
use tnbs_core::model::{LagSpec, Scaling, TnbsModel};
use tnbs_core::tensor::{DenseTensor, TensorTrain};

fn random_tt(rng: &mut ChaCha8Rng, extents: &[usize], ranks: &[usize]) -> TensorTrain {
    TensorTrain::from_fn(extents, ranks, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn lags_for(d: usize) -> LagSpec {
    let nu = d.div_ceil(2);
    LagSpec::new((1..=nu).collect(), (1..=d - nu).collect()).unwrap()
}

fn core_vector(tt: &TensorTrain, p: usize) -> DVector<f64> {
    DVector::from_column_slice(tt.core(p).values())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn surface_matches_dense_sum(seed in any::<u64>(), d in 1usize..=4, c in 0usize..3) {
        let (rho, m) = [(1, 4), (2, 6), (3, 7)][c];
        let basis = BasisConfig::new(rho, m).unwrap();
        let k = basis.basis_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ranks: Vec<usize> = (1..d).map(|_| rng.random_range(1..=3)).collect();
        let tt = random_tt(&mut rng, &vec![k; d], &ranks);
        let full = tt.to_full().unwrap();
        let model = TnbsModel::new(basis.clone(), lags_for(d), tt, Scaling::identity()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let bases: Vec<Vec<f64>> = x.iter().map(|&v| naive_basis(&basis, v)).collect();
            let fast = model.eval_surface(&x).unwrap();
            let slow = dense_surface(&full, &bases);
            prop_assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn omega_quadratic_matches_dense_penalty(seed in any::<u64>(), alpha in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tt = random_tt(&mut rng, &[4, 4, 4], &[2, 2]);
        let dmat = difference_matrix(4, alpha).unwrap();
        let lambdas = [0.3, 1.7, 0.05];
        for p in 0..3 {
            let can = tt.orthogonalize_to_site(p).unwrap();
            let full = can.to_full().unwrap();
            let g = core_vector(&can, p);
            let mut weighted = 0.0;
            for (j, lam) in lambdas.iter().enumerate() {
                let omega = build_omega(&can, &dmat, p, j).unwrap();
                let fast = (g.transpose() * &omega * &g)[(0, 0)];
                let slow = dense_penalty(&full, &dmat, j).unwrap();
                prop_assert!((fast - slow).abs() < 1e-9, "p={p} j={j}: {fast} vs {slow}");
                weighted += lam * slow;
            }
            let blocks = PenaltyBlocks::new(&can, &(dmat.transpose() * &dmat), p, &lambdas).unwrap();
            prop_assert!((blocks.quadratic(&g) - weighted).abs() < 1e-9);
        }
    }

    #[test]
    fn regression_matrix_reproduces_outputs(seed in any::<u64>(), p in 0usize..3) {
        let basis = BasisConfig::new(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tt = random_tt(&mut rng, &[4, 4, 4], &[3, 2]).orthogonalize_to_site(p).unwrap();
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..10).map(|_| rng.random()).collect()).collect();
        let rows: Vec<_> = xs.iter().map(|c| basis.rows(c).unwrap()).collect();
        let a = build_a(&tt, &rows, p).unwrap();
        let out = &a * core_vector(&tt, p);
        let model = TnbsModel::new(basis, lags_for(3), tt, Scaling::identity()).unwrap();
        for n in 0..10 {
            let x = [xs[0][n], xs[1][n], xs[2][n]];
            prop_assert!((out[n] - model.eval_surface(&x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn update_matches_explicit_inverse(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(50, 24, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
        let tt = random_tt(&mut rng, &[4, 4, 4], &[2, 3]).orthogonalize_to_site(1).unwrap();
        let dmat = difference_matrix(4, 1).unwrap();
        let omegas: Vec<DMatrix<f64>> = (0..3).map(|j| build_omega(&tt, &dmat, 1, j).unwrap()).collect();
        let lambdas = [0.1; 3];
        let (g, info) = update_core(&a, &y, &omegas, &lambdas).unwrap();
        let mut h = a.transpose() * &a;
        for o in &omegas {
            h += o * 0.1;
        }
        let inv = h.clone().try_inverse().unwrap();
        let oracle = inv * (a.transpose() * &y);
        prop_assert!((&g - &oracle).amax() < 1e-8);
        prop_assert!(!info.pseudo_inverse);
    }
}

#[test]
fn regression_matrix_for_one_regressor_is_the_basis() {
    let basis = BasisConfig::new(3, 7).unwrap();
    let tt = TensorTrain::new(vec![DenseTensor::new(vec![1, 4, 1], vec![0.1, 0.2, 0.3, 0.4]).unwrap()]).unwrap();
    let xs = [0.0, 0.13, 0.5, 0.77, 1.0];
    let rows = basis.rows(&xs).unwrap();
    let a = build_a(&tt, std::slice::from_ref(&rows), 0).unwrap();
    for (n, _) in xs.iter().enumerate() {
        assert_eq!(a.row(n).iter().copied().collect::<Vec<_>>(), rows.row(n));
    }
}

#[test]
fn regression_matrix_width_for_tanks_config() {
    let basis = BasisConfig::new(3, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tt = random_tt(&mut rng, &[4; 16], &[8; 15]).orthogonalize_to_site(2).unwrap();
    let xs: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
    let rows: Vec<_> = (0..16).map(|_| basis.rows(&xs).unwrap()).collect();
    let a = build_a(&tt, &rows, 2).unwrap();
    assert_eq!(a.shape(), (5, 256));
    assert_eq!(tt.parameter_count(), 3648);
    assert!(build_a(&tt, &rows, 3).is_err());
}

#[test]
fn worked_difference_examples() {
    let d1 = difference_matrix(3, 1).unwrap();
    assert_eq!(d1, DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]));
    let d2 = difference_matrix(4, 2).unwrap();
    assert_eq!(d2, DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 1.0, 0.0, 0.0, 1.0, -2.0, 1.0]));
    assert_eq!(difference_matrix(3, 0).unwrap(), DMatrix::identity(3, 3));
    assert!(difference_matrix(3, 3).is_err());
    let w = DenseTensor::new(vec![3], vec![2.0, -1.0, 0.5]).unwrap();
    assert_eq!(dense_penalty(&w, &d1, 0).unwrap(), 9.0 + 2.25);
}

#[test]
fn update_edge_cases() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 3.0]);
    let y = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
    let eye = DMatrix::identity(3, 3);
    let (g, _) = update_core(&a, &y, &[eye.clone()], &[0.0]).unwrap();
    assert!((&a * &g - &y).amax() < 1e-12);
    let mut last = g.norm();
    for lam in [0.1, 1.0, 10.0, 100.0, 1e4] {
        let (g, _) = update_core(&a, &y, &[eye.clone()], &[lam]).unwrap();
        assert!(g.norm() < last);
        last = g.norm();
    }
    let mut bad = y.clone();
    bad[0] = f64::NAN;
    assert!(update_core(&a, &bad, &[eye], &[0.0]).is_err());
}
