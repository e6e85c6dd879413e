use serde::{Deserialize, Serialize};

use super::fit::{fit_regressors, FitConfig};
use crate::bspline::BasisConfig;
use crate::error::{Result, TnbsError};
use crate::model::{build_regressors, rmse, LagSpec, Scaling, TnbsModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub lambda: f64,
    /// Held-out one-step RMSE per fold, original units.
    pub folds: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub scores: Vec<CvScore>,
}

/// Contiguous `[start, end)` blocks covering `0..n`; the first `n % folds`
/// blocks are one longer.
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<(usize, usize)>> {
    if folds < 2 {
        return Err(TnbsError::Config("cross-validation needs at least 2 folds".into()));
    }
    if folds > n {
        return Err(TnbsError::InsufficientData { needed: folds, available: n });
    }
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    Ok((0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = (start, start + len);
            start += len;
            r
        })
        .collect())
}

/// Picks a scalar λ (applied to every dimension) by blocked
/// cross-validation of the one-step predictor. Ties go to the larger λ.
pub fn cross_validate_lambda(
    u: &[f64],
    y: &[f64],
    lags: &LagSpec,
    basis: &BasisConfig,
    cfg: &FitConfig,
    grid: &[f64],
    folds: usize,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(TnbsError::Config("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(TnbsError::Config("grid values must be finite and >= 0".into()));
    }
    let scaling = match cfg.scaling {
        Some(s) => s,
        None => Scaling::fit(u, y)?,
    };
    let reg = build_regressors(u, y, lags, &scaling)?;
    let ranges = fold_ranges(reg.len(), folds)?;
    let d = lags.dim();

    let runs = cfg.execution.map(grid.len() * folds, |job| -> Result<f64> {
        let (li, f) = (job / folds, job % folds);
        let (lo, hi) = ranges[f];
        let train: Vec<usize> = (0..reg.len()).filter(|i| *i < lo || *i >= hi).collect();
        let held: Vec<usize> = (lo..hi).collect();
        let mut c = cfg.clone();
        c.lambdas = vec![grid[li]; d];
        let (tt, _) = fit_regressors(&reg.select(&train), basis, &c)?;
        let model = TnbsModel::new(basis.clone(), lags.clone(), tt, scaling)?;
        let val = reg.select(&held);
        let pred: Vec<f64> = model
            .eval_rows(&val, c.execution)?
            .into_iter()
            .map(|s| scaling.descale_y(s))
            .collect();
        let truth: Vec<f64> = val.targets.iter().map(|&t| scaling.descale_y(t)).collect();
        rmse(&truth, &pred)
    });
    let runs = runs.into_iter().collect::<Result<Vec<f64>>>()?;

    let scores: Vec<CvScore> = grid
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let folds_rmse = runs[li * folds..(li + 1) * folds].to_vec();
            let mean = folds_rmse.iter().sum::<f64>() / folds as f64;
            CvScore { lambda, folds: folds_rmse, mean }
        })
        .collect();
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.mean < best.mean || (s.mean == best.mean && s.lambda > best.lambda) {
            best = s;
        }
    }
    if !best.mean.is_finite() {
        return Err(TnbsError::Numerical("no finite validation score".into()));
    }
    Ok(CvResult { lambda: best.lambda, scores })
}
