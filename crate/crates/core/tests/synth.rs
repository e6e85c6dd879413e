use proptest::prelude::*;
use tnbs_core::synth::{add_noise, gaussian_window, generate_input, generate_true_weights, smooth, SynthData, SynthSpec};

#[test]
fn default_benchmark_shape() {
    let spec = SynthSpec::default();
    let lags = spec.lags().unwrap();
    assert_eq!(lags.dim(), 8);
    let basis = spec.basis().unwrap();
    assert_eq!(basis.basis_count(), 4);
    let tt = generate_true_weights(&spec).unwrap();
    assert_eq!(tt.extents(), vec![4; 8]);
    assert!(tt.ranks().iter().all(|&r| r <= 5));
    let full = tt.to_full().unwrap();
    assert_eq!(full.len(), 65536);

    let data = SynthData::generate(&spec).unwrap();
    assert_eq!(data.u.len(), 3000);
    assert_eq!(data.y.len(), 3000);
    assert_eq!(data.estimation().0.len(), 2000);
    assert_eq!(data.test().1.len(), 1000);
    assert!(data.u.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(data.y.iter().all(|v| v.is_finite()));
    assert!(data.y[..4].iter().all(|&v| v == 0.0));
}

#[test]
fn generation_is_seeded() {
    let a = SynthData::generate(&SynthSpec::default()).unwrap();
    let b = SynthData::generate(&SynthSpec::default()).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.y, b.y);
    let c = SynthData::generate(&SynthSpec { seed: 1, ..SynthSpec::default() }).unwrap();
    assert_ne!(a.u, c.u);
}

#[test]
fn output_follows_the_true_model() {
    let data = SynthData::generate(&SynthSpec { n: 200, n_est: 100, ..SynthSpec::default() }).unwrap();
    let pred = data.model.predict(&data.u, &data.y).unwrap();
    for (p, y) in pred.iter().zip(&data.y[4..]) {
        assert!((p - y).abs() < 1e-12);
    }
}

#[test]
fn smoothing_preserves_constants_and_lowers_variance() {
    let w = gaussian_window(5, 1.0).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(w[0], w[4]);
    let flat = smooth(&[0.7; 9], &w);
    assert!(flat.iter().all(|v| (v - 0.7).abs() < 1e-15));
    let u = generate_input(5000, 5, 3).unwrap();
    let raw = generate_input(5000, 1, 3).unwrap();
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    };
    assert!(var(&u) < 0.5 * var(&raw));
    let mad = |x: &[f64]| x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (x.len() - 1) as f64;
    assert!(mad(&u) < mad(&raw));
    assert!(raw.iter().all(|v| (0.0..1.0).contains(v)));
    assert!(gaussian_window(4, 1.0).is_err());
}

#[test]
fn noise_hits_the_requested_snr() {
    let y: Vec<f64> = (0..20000).map(|i| (i as f64 * 0.01).sin()).collect();
    for snr in [5.0, 10.0, 20.0, 40.0] {
        let noisy = add_noise(&y, snr, 9).unwrap();
        let pn = noisy.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let ps = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64;
        let measured = 10.0 * (ps / pn).log10();
        assert!((measured - snr).abs() < 0.1, "{measured} vs {snr}");
    }
    assert_eq!(add_noise(&y, f64::INFINITY, 0).unwrap(), y);

    let mut unit: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.37).sin()).collect();
    let m = unit.iter().sum::<f64>() / 3000.0;
    let p = unit.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3000.0;
    unit.iter_mut().for_each(|v| *v = (*v - m) / p.sqrt());
    let noisy = add_noise(&unit, 20.0, 1).unwrap();
    let var = noisy.iter().zip(&unit).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3000.0;
    assert!((var - 0.01).abs() < 0.001, "{var}");
    let zero_db = add_noise(&unit, 0.0, 1).unwrap();
    let var0 = zero_db.iter().zip(&unit).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3000.0;
    assert!((var0 - 1.0).abs() < 0.1);
    assert!(add_noise(&[], 10.0, 0).is_err());
    assert!(add_noise(&y, f64::NAN, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inputs_stay_in_the_unit_interval(n in 5usize..400, half in 0usize..4, seed in any::<u64>()) {
        let u = generate_input(n.max(2 * half + 1), 2 * half + 1, seed).unwrap();
        prop_assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
