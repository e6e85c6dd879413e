//! Synthetic NARX benchmark: a random TNBS system driven by smoothed
//! uniform noise.
//!
//! Everything is generated in scaled units, so the true model uses the
//! identity scaling. Each random quantity draws from its own ChaCha stream
//! of the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bspline::BasisConfig;
use crate::error::{Result, TnbsError};
use crate::model::{LagSpec, Scaling, TnbsModel};
use crate::tensor::{tt_svd, DenseTensor, TensorTrain, Truncation, DENSE_ELEMENT_CAP};

/// Standard deviation of the smoothing window, in samples.
pub const WINDOW_SIGMA: f64 = 1.0;

const STREAM_WEIGHTS: u64 = 0;
const STREAM_INPUT: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub input_lags: Vec<usize>,
    pub output_lags: Vec<usize>,
    pub degree: usize,
    pub knot_param: usize,
    pub rank: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub n: usize,
    pub n_est: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            input_lags: vec![1, 2, 3, 4],
            output_lags: vec![1, 2, 3, 4],
            degree: 2,
            knot_param: 6,
            rank: 5,
            w_min: -4.0,
            w_max: 5.0,
            n: 3000,
            n_est: 2000,
            window: 5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn lags(&self) -> Result<LagSpec> {
        LagSpec::new(self.input_lags.clone(), self.output_lags.clone())
    }

    pub fn basis(&self) -> Result<BasisConfig> {
        BasisConfig::new(self.degree, self.knot_param)
    }

    pub fn validate(&self) -> Result<()> {
        let lags = self.lags()?;
        self.basis()?;
        if self.rank == 0 {
            return Err(TnbsError::Config("rank must be >= 1".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(TnbsError::Config(format!("window length {} must be odd and >= 1", self.window)));
        }
        if !(self.w_min.is_finite() && self.w_max.is_finite()) {
            return Err(TnbsError::Config("weight values must be finite".into()));
        }
        if self.n_est > self.n || self.n < self.window || self.n <= lags.max_lag() {
            return Err(TnbsError::Config(format!(
                "signal length {} too short for window {}, lags and estimation length {}",
                self.n, self.window, self.n_est
            )));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Dense two-valued tensor compressed with TT-SVD to the configured rank.
pub fn generate_true_weights(spec: &SynthSpec) -> Result<TensorTrain> {
    let d = spec.lags()?.dim();
    let k = spec.basis()?.basis_count();
    let elements = (k as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if elements > DENSE_ELEMENT_CAP as u128 {
        return Err(TnbsError::CapExceeded {
            elements: usize::try_from(elements).unwrap_or(usize::MAX),
            cap: DENSE_ELEMENT_CAP,
        });
    }
    let mut rng = stream(spec.seed, STREAM_WEIGHTS);
    let dense = DenseTensor::from_fn(vec![k; d], |_| if rng.random_bool(0.5) { spec.w_min } else { spec.w_max })?;
    tt_svd(&dense, &Truncation::MaxRanks(vec![spec.rank; d - 1]))
}

pub fn true_model(spec: &SynthSpec) -> Result<TnbsModel> {
    TnbsModel::new(spec.basis()?, spec.lags()?, generate_true_weights(spec)?, Scaling::identity())
}

/// Unit-sum Gaussian window of odd length.
pub fn gaussian_window(len: usize, sigma: f64) -> Result<Vec<f64>> {
    if len == 0 || len % 2 == 0 {
        return Err(TnbsError::Config(format!("window length {len} must be odd and >= 1")));
    }
    let half = (len / 2) as f64;
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let x = i as f64 - half;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / s).collect())
}

/// Symmetric-padded convolution, same length as the input.
pub fn smooth(x: &[f64], window: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (window.len() / 2) as isize;
    let at = |i: isize| -> f64 {
        let mut j = i;
        while j < 0 || j >= n {
            j = if j < 0 { -j - 1 } else { 2 * n - j - 1 };
        }
        x[j as usize]
    };
    (0..n)
        .map(|t| window.iter().enumerate().map(|(i, w)| w * at(t + i as isize - half)).sum())
        .collect()
}

/// Uniform `[0, 1]` samples smoothed by the Gaussian window and clipped
/// back to the unit interval.
pub fn generate_input(n: usize, window: usize, seed: u64) -> Result<Vec<f64>> {
    let w = gaussian_window(window, WINDOW_SIGMA)?;
    if n < window {
        return Err(TnbsError::InsufficientData { needed: window, available: n });
    }
    let mut rng = stream(seed, STREAM_INPUT);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    Ok(smooth(&raw, &w).into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Runs the model recursively from `warmup` zero outputs until `u.len()`
/// samples exist.
pub fn generate_output(model: &TnbsModel, u: &[f64], warmup: usize) -> Result<Vec<f64>> {
    if warmup < model.lags().max_lag() {
        return Err(TnbsError::Config(format!(
            "warmup {warmup} shorter than the largest lag {}",
            model.lags().max_lag()
        )));
    }
    let sim = model.simulate(u, &vec![0.0; warmup])?;
    let mut y = vec![0.0; warmup];
    y.extend(sim.outputs);
    Ok(y)
}

/// Adds white Gaussian noise at the given SNR (dB) relative to the
/// mean-removed signal power. Infinite SNR returns the signal unchanged.
/// The unit-variance noise sequence depends only on `seed`.
pub fn add_noise(y: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(TnbsError::Input("cannot add noise to an empty signal".into()));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(TnbsError::Config(format!("invalid SNR {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(y.to_vec());
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let power = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
    let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = stream(seed, STREAM_NOISE);
    Ok(y.iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sd * z
        })
        .collect())
}

/// A generated record with its estimation/test split.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub spec: SynthSpec,
    pub model: TnbsModel,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl SynthData {
    pub fn generate(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let model = true_model(spec)?;
        let u = generate_input(spec.n, spec.window, spec.seed)?;
        let y = generate_output(&model, &u, model.lags().max_lag())?;
        Ok(Self { spec: spec.clone(), model, u, y })
    }

    pub fn estimation(&self) -> (&[f64], &[f64]) {
        (&self.u[..self.spec.n_est], &self.y[..self.spec.n_est])
    }

    pub fn test(&self) -> (&[f64], &[f64]) {
        (&self.u[self.spec.n_est..], &self.y[self.spec.n_est..])
    }

    /// Estimation output with noise at `snr_db`.
    pub fn noisy_estimation(&self, snr_db: f64, noise_seed: u64) -> Result<Vec<f64>> {
        add_noise(self.estimation().1, snr_db, noise_seed)
    }
}
