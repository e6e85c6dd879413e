use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tnbs", version, about = "Tensor-network B-spline NARX identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on an input/output record.
    Fit(FitCmd),
    /// One-step-ahead prediction with measured output history.
    Predict(EvalCmd),
    /// Free-run simulation driven by the input only.
    Simulate(EvalCmd),
    /// Generate a synthetic benchmark from a random true model.
    Synth(SynthCmd),
    /// Choose the smoothing parameter by k-fold cross-validation.
    Cv(CvCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingMode {
    /// Min/max of the training record.
    Fit,
    /// Data already lies in [0, 1].
    Identity,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the machine-readable JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// B-spline degree.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Knot parameter m; each regressor gets m - degree basis functions.
    #[arg(long, default_value_t = 7)]
    pub knots: usize,
    /// One interior rank for all interfaces, or d-1 values.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub ranks: Vec<usize>,
    #[arg(long = "lags-u", value_delimiter = ',', default_value = "1,2,3,4")]
    pub lags_u: Vec<usize>,
    #[arg(long = "lags-y", value_delimiter = ',', default_value = "1,2,3,4")]
    pub lags_y: Vec<usize>,
    /// Order of the difference penalty.
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    #[arg(long, default_value_t = 12)]
    pub sweeps: usize,
    /// Stop when the sweep objective changes by at most this much.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Random subset size per core update (all samples when omitted).
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScalingMode::Fit)]
    pub scaling: ScalingMode,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    /// Training CSV with header `u,y`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// One smoothing parameter for every dimension, or d values.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub lambda: Vec<f64>,
    /// Pick lambda from this grid by cross-validation before fitting.
    #[arg(long = "cv-grid", value_delimiter = ',', conflicts_with = "lambda")]
    pub cv_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with header `u,y`.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional per-sample CSV `n,y,yhat`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate smoothing parameters, each applied to every dimension.
    #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.01,0.1,1,10")]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Noise level on the estimation output in dB; `inf` for none.
    #[arg(long, default_value = "inf")]
    pub snr: f64,
    /// Seed of the noise sequence (defaults to --seed).
    #[arg(long = "noise-seed")]
    pub noise_seed: Option<u64>,
    #[arg(long, default_value_t = 3000)]
    pub n: usize,
    #[arg(long = "n-est", default_value_t = 2000)]
    pub n_est: usize,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 6)]
    pub knots: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long = "lags-u", value_delimiter = ',', default_value = "1,2,3,4")]
    pub lags_u: Vec<usize>,
    #[arg(long = "lags-y", value_delimiter = ',', default_value = "1,2,3,4")]
    pub lags_y: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long = "w-min", default_value_t = -4.0, allow_hyphen_values = true)]
    pub w_min: f64,
    #[arg(long = "w-max", default_value_t = 5.0, allow_hyphen_values = true)]
    pub w_max: f64,
    #[command(flatten)]
    pub common: Common,
}
