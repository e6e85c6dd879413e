use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tnbs_core::als::{als_fit, cross_validate_lambda, FitConfig};
use tnbs_core::bspline::BasisConfig;
use tnbs_core::model::{rmse, LagSpec, Scaling, TnbsModel};
use tnbs_core::synth::{SynthData, SynthSpec};
use tnbs_core::TnbsError;

use crate::args::{CvCmd, EvalCmd, FitCmd, ModelArgs, ScalingMode, SynthCmd};
use crate::data::{read_record, write_record, write_samples, Record};
use crate::report::{list, Report};

#[derive(Debug, Serialize)]
struct ResolvedFit {
    data: String,
    samples: usize,
    degree: usize,
    knots: usize,
    basis_functions: usize,
    lags_u: Vec<usize>,
    lags_y: Vec<usize>,
    ranks: Vec<usize>,
    alpha: usize,
    lambdas: Vec<f64>,
    sweeps: usize,
    epsilon: f64,
    batch_size: Option<usize>,
    scaling: Scaling,
    seed: u64,
}

struct Setup {
    lags: LagSpec,
    basis: BasisConfig,
    cfg: FitConfig,
}

fn expand<T: Copy>(values: &[T], n: usize, what: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => bail!("--{what} takes 1 or {n} values, got {len}"),
    }
}

fn setup(m: &ModelArgs, rec: &Record, lambdas: &[f64], seed: u64) -> Result<Setup> {
    let lags = LagSpec::new(m.lags_u.clone(), m.lags_y.clone())?;
    let basis = BasisConfig::new(m.degree, m.knots)?;
    let d = lags.dim();
    if rec.len() <= lags.max_lag() {
        return Err(TnbsError::InsufficientData { needed: lags.max_lag() + 1, available: rec.len() }.into());
    }
    let scaling = match m.scaling {
        ScalingMode::Fit => Scaling::fit(&rec.u, &rec.y)?,
        ScalingMode::Identity => Scaling::identity(),
    };
    let cfg = FitConfig {
        ranks: expand(&m.ranks, d - 1, "ranks")?,
        penalty_order: m.alpha,
        lambdas: expand(lambdas, d, "lambda")?,
        max_sweeps: m.sweeps,
        epsilon: m.epsilon,
        seed,
        batch_size: m.batch_size,
        scaling: Some(scaling),
        execution: Default::default(),
    };
    cfg.validate(d, basis.basis_count())?;
    Ok(Setup { lags, basis, cfg })
}

fn resolved(data: &Path, rec: &Record, s: &Setup) -> ResolvedFit {
    ResolvedFit {
        data: data.display().to_string(),
        samples: rec.len(),
        degree: s.basis.degree(),
        knots: s.basis.knot_param(),
        basis_functions: s.basis.basis_count(),
        lags_u: s.lags.input_lags().to_vec(),
        lags_y: s.lags.output_lags().to_vec(),
        ranks: s.cfg.ranks.clone(),
        alpha: s.cfg.penalty_order,
        lambdas: s.cfg.lambdas.clone(),
        sweeps: s.cfg.max_sweeps,
        epsilon: s.cfg.epsilon,
        batch_size: s.cfg.batch_size,
        scaling: s.cfg.scaling.expect("scaling resolved"),
        seed: s.cfg.seed,
    }
}

fn echo_config(r: &mut Report, c: &ResolvedFit) {
    r.heading("configuration");
    r.line("data", format!("{} ({} samples)", c.data, c.samples));
    r.line("degree / knots", format!("{} / {} ({} basis functions)", c.degree, c.knots, c.basis_functions));
    r.line("input lags", list(&c.lags_u));
    r.line("output lags", list(&c.lags_y));
    r.line("ranks", list(&c.ranks));
    r.line("penalty order", c.alpha);
    r.line("lambda", list(&c.lambdas));
    r.line("max sweeps", c.sweeps);
    r.line("epsilon", c.epsilon);
    r.line("batch size", c.batch_size.map_or("all".to_string(), |b| b.to_string()));
    r.line(
        "scaling u",
        format!("[{}, {}]", c.scaling.u_min, c.scaling.u_max),
    );
    r.line(
        "scaling y",
        format!("[{}, {}]", c.scaling.y_min, c.scaling.y_max),
    );
    r.line("seed", c.seed);
}

fn cv_table(r: &mut Report, scores: &[tnbs_core::als::CvScore]) {
    let folds = scores.first().map_or(0, |s| s.folds.len());
    let mut t = format!("  {:>12}", "lambda");
    for f in 0..folds {
        t.push_str(&format!(" {:>12}", format!("fold {}", f + 1)));
    }
    t.push_str(&format!(" {:>12}\n", "mean"));
    for s in scores {
        t.push_str(&format!("  {:>12}", s.lambda));
        for v in &s.folds {
            t.push_str(&format!(" {v:>12.6e}"));
        }
        t.push_str(&format!(" {:>12.6e}\n", s.mean));
    }
    r.raw(&t);
}

pub fn fit(cmd: &FitCmd) -> Result<()> {
    let rec = read_record(&cmd.data)?;
    let lambdas = cmd.cv_grid.as_ref().map_or(cmd.lambda.clone(), |g| vec![g.first().copied().unwrap_or(0.0)]);
    let mut s = setup(&cmd.model, &rec, &lambdas, cmd.common.seed)?;
    let mut report = Report::new("fit");

    if let Some(grid) = &cmd.cv_grid {
        let cv = cross_validate_lambda(&rec.u, &rec.y, &s.lags, &s.basis, &s.cfg, grid, cmd.folds)?;
        s.cfg.lambdas = vec![cv.lambda; s.lags.dim()];
        report.heading(&format!("{}-fold cross-validation (held-out one-step RMSE)", cmd.folds));
        cv_table(&mut report, &cv.scores);
        report.line("selected lambda", cv.lambda);
        report.set("cross_validation", &cv);
    }
    let config = resolved(&cmd.data, &rec, &s);
    echo_config(&mut report, &config);

    let start = Instant::now();
    let (model, trace) = als_fit(&rec.u, &rec.y, &s.lags, &s.basis, &s.cfg)?;
    let elapsed = start.elapsed();
    let pred = model.predict(&rec.u, &rec.y)?;
    let train_rmse = rmse(&rec.y[s.lags.start_index()..], &pred)?;
    model.save(&cmd.out).with_context(|| format!("cannot write model {}", cmd.out.display()))?;

    report.heading("sweeps");
    let mut t = format!("  {:>5} {:>22}\n", "sweep", "objective");
    for (h, j) in trace.sweep_objectives.iter().enumerate() {
        t.push_str(&format!("  {:>5} {j:>22.12e}\n", h + 1));
    }
    report.raw(&t);
    report.heading("result");
    report.line("sweeps run", trace.sweeps);
    report.line("converged", trace.converged);
    report.line("final objective", format!("{:.12e}", trace.final_objective().unwrap_or(f64::NAN)));
    report.line("pseudo-inverse solves", trace.pseudo_inverse_solves);
    report.line("clipped regressors", trace.clipped_regressors);
    report.line("parameters", model.parameter_count());
    report.line("training RMSE", format!("{train_rmse:.6e}"));
    report.line("wall time", format!("{:.3} s", elapsed.as_secs_f64()));
    report.line("model", cmd.out.display());

    report.set("config", &config);
    report.set("trace", &trace);
    report.set("parameter_count", model.parameter_count());
    report.set("train_rmse", train_rmse);
    report.set("model", cmd.out.display().to_string());
    report.emit(cmd.common.report.as_deref())
}

pub fn cv(cmd: &CvCmd) -> Result<()> {
    let rec = read_record(&cmd.data)?;
    let first = cmd.lambda.first().copied().unwrap_or(0.0);
    let s = setup(&cmd.model, &rec, &[first], cmd.common.seed)?;
    let mut report = Report::new("cv");
    let mut config = resolved(&cmd.data, &rec, &s);
    config.lambdas = cmd.lambda.clone();
    echo_config(&mut report, &config);
    report.line("folds", cmd.folds);
    let result = cross_validate_lambda(&rec.u, &rec.y, &s.lags, &s.basis, &s.cfg, &cmd.lambda, cmd.folds)?;
    report.heading("held-out one-step RMSE");
    cv_table(&mut report, &result.scores);
    report.line("selected lambda", result.lambda);
    report.set("config", &config);
    report.set("folds", cmd.folds);
    report.set("cross_validation", &result);
    report.emit(cmd.common.report.as_deref())
}

fn load_pair(cmd: &EvalCmd) -> Result<(TnbsModel, Record)> {
    let model = TnbsModel::load(&cmd.model)?;
    let rec = read_record(&cmd.data)?;
    let need = model.lags().max_lag() + 1;
    if rec.len() < need {
        bail!(
            "{}: {} samples, the model's lags need at least {need}",
            cmd.data.display(),
            rec.len()
        );
    }
    Ok((model, rec))
}

fn eval_header(r: &mut Report, cmd: &EvalCmd, model: &TnbsModel, rec: &Record) {
    r.heading("configuration");
    r.line("model", cmd.model.display());
    r.line("data", format!("{} ({} samples)", cmd.data.display(), rec.len()));
    r.line("input lags", list(model.lags().input_lags()));
    r.line("output lags", list(model.lags().output_lags()));
    r.line("seed", cmd.common.seed);
}

pub fn predict(cmd: &EvalCmd) -> Result<()> {
    let (model, rec) = load_pair(cmd)?;
    let mut report = Report::new("predict");
    eval_header(&mut report, cmd, &model, &rec);
    let start = model.lags().start_index();
    let yhat = model.predict(&rec.u, &rec.y)?;
    let err = rmse(&rec.y[start..], &yhat)?;
    if let Some(out) = &cmd.out {
        write_samples(out, start, &rec.y, &yhat)?;
    }
    report.heading("result");
    report.line("first predicted sample", start);
    report.line("samples", yhat.len());
    report.line("prediction RMSE", format!("{err:.6e}"));
    report.set("samples", yhat.len());
    report.set("start", start);
    report.set("rmse", err);
    report.emit(cmd.common.report.as_deref())
}

pub fn simulate(cmd: &EvalCmd) -> Result<()> {
    let (model, rec) = load_pair(cmd)?;
    let mut report = Report::new("simulate");
    eval_header(&mut report, cmd, &model, &rec);
    let warmup = model.lags().max_lag();
    let sim = model.simulate(&rec.u, &rec.y[..warmup])?;
    let err = rmse(&rec.y[warmup..], &sim.outputs)?;
    if let Some(out) = &cmd.out {
        write_samples(out, warmup, &rec.y, &sim.outputs)?;
    }
    report.heading("result");
    report.line("warmup samples", warmup);
    report.line("samples", sim.outputs.len());
    report.line("clipped feedback", sim.clipped);
    report.line("simulation RMSE", format!("{err:.6e}"));
    report.set("samples", sim.outputs.len());
    report.set("warmup", warmup);
    report.set("clipped", sim.clipped);
    report.set("rmse", err);
    report.emit(cmd.common.report.as_deref())
}

pub fn synth(cmd: &SynthCmd) -> Result<()> {
    let spec = SynthSpec {
        input_lags: cmd.lags_u.clone(),
        output_lags: cmd.lags_y.clone(),
        degree: cmd.degree,
        knot_param: cmd.knots,
        rank: cmd.rank,
        w_min: cmd.w_min,
        w_max: cmd.w_max,
        n: cmd.n,
        n_est: cmd.n_est,
        window: cmd.window,
        seed: cmd.common.seed,
    };
    spec.validate()?;
    if cmd.snr.is_nan() || cmd.snr == f64::NEG_INFINITY {
        bail!("--snr must be a number of dB or `inf`");
    }
    let noise_seed = cmd.noise_seed.unwrap_or(cmd.common.seed);
    let mut report = Report::new("synth");
    report.heading("configuration");
    report.line("input lags", list(&spec.input_lags));
    report.line("output lags", list(&spec.output_lags));
    report.line("degree / knots", format!("{} / {}", spec.degree, spec.knot_param));
    report.line("true rank", spec.rank);
    report.line("weights", format!("{{{}, {}}}", spec.w_min, spec.w_max));
    report.line("samples", format!("{} ({} estimation)", spec.n, spec.n_est));
    report.line("smoothing window", spec.window);
    report.line("snr (dB)", cmd.snr);
    report.line("seed", spec.seed);
    report.line("noise seed", noise_seed);

    let data = SynthData::generate(&spec)?;
    let y_est = data.noisy_estimation(cmd.snr, noise_seed)?;
    std::fs::create_dir_all(&cmd.out).with_context(|| format!("cannot create {}", cmd.out.display()))?;
    let (est_path, test_path, model_path) =
        (cmd.out.join("estimation.csv"), cmd.out.join("test.csv"), cmd.out.join("true_model.json"));
    let (u_est, _) = data.estimation();
    let (u_test, y_test) = data.test();
    write_record(&est_path, u_est, &y_est)?;
    write_record(&test_path, u_test, y_test)?;
    data.model.save(&model_path).with_context(|| format!("cannot write {}", model_path.display()))?;

    report.heading("output");
    report.line("estimation", format!("{} ({} rows)", est_path.display(), u_est.len()));
    report.line("test", format!("{} ({} rows)", test_path.display(), u_test.len()));
    report.line("true model", format!("{} ({} parameters)", model_path.display(), data.model.parameter_count()));
    report.set("spec", &spec);
    report.set("snr_db", if cmd.snr.is_finite() { Some(cmd.snr) } else { None });
    report.set("noise_seed", noise_seed);
    report.set("estimation_rows", u_est.len());
    report.set("test_rows", u_test.len());
    report.set("true_ranks", data.model.weights().ranks());
    report.emit(cmd.common.report.as_deref())
}
