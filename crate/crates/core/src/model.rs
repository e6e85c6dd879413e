//! The TNBS surface and its NARX wrapper.

use serde::{Deserialize, Serialize};

use crate::bspline::BasisConfig;
use crate::error::{Result, TnbsError};
use crate::exec::{Execution, CHUNK_ROWS};
use crate::tensor::{dims, TensorTrain};

/// Lags applied to the input `u` (may include 0) and the output `y`
/// (strictly positive). Regressors are ordered input lags ascending, then
/// output lags ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    input_lags: Vec<usize>,
    output_lags: Vec<usize>,
}

impl LagSpec {
    pub fn new(mut input_lags: Vec<usize>, mut output_lags: Vec<usize>) -> Result<Self> {
        input_lags.sort_unstable();
        input_lags.dedup();
        output_lags.sort_unstable();
        output_lags.dedup();
        if output_lags.first() == Some(&0) {
            return Err(TnbsError::Config("output lags must be >= 1".into()));
        }
        if input_lags.is_empty() && output_lags.is_empty() {
            return Err(TnbsError::Config("at least one lag is required".into()));
        }
        Ok(Self { input_lags, output_lags })
    }

    pub fn input_lags(&self) -> &[usize] {
        &self.input_lags
    }

    pub fn output_lags(&self) -> &[usize] {
        &self.output_lags
    }

    /// Number of regressors `d`.
    pub fn dim(&self) -> usize {
        self.input_lags.len() + self.output_lags.len()
    }

    pub fn max_lag(&self) -> usize {
        self.input_lags
            .iter()
            .chain(&self.output_lags)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn max_output_lag(&self) -> usize {
        self.output_lags.last().copied().unwrap_or(0)
    }

    /// First sample index (0-based) with a complete regressor.
    pub fn start_index(&self) -> usize {
        self.max_lag()
    }
}

/// Min-max maps of input and output onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub u_min: f64,
    pub u_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Scaling {
    pub fn new(u_min: f64, u_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let s = Self { u_min, u_max, y_min, y_max };
        s.validate()?;
        Ok(s)
    }

    pub fn identity() -> Self {
        Self { u_min: 0.0, u_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    /// Min-max parameters of the given estimation signals.
    pub fn fit(u: &[f64], y: &[f64]) -> Result<Self> {
        let (u_min, u_max) = min_max(u, "input")?;
        let (y_min, y_max) = min_max(y, "output")?;
        Self::new(u_min, u_max, y_min, y_max)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.u_min, self.u_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(TnbsError::Config("scaling bounds must be finite".into()));
        }
        if self.u_min >= self.u_max {
            return Err(TnbsError::DegenerateScaling("input"));
        }
        if self.y_min >= self.y_max {
            return Err(TnbsError::DegenerateScaling("output"));
        }
        Ok(())
    }

    pub fn apply_u(&self, u: f64) -> f64 {
        (u - self.u_min) / (self.u_max - self.u_min)
    }

    pub fn apply_y(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn descale_y(&self, s: f64) -> f64 {
        self.y_min + s * (self.y_max - self.y_min)
    }

    pub fn descale_u(&self, s: f64) -> f64 {
        self.u_min + s * (self.u_max - self.u_min)
    }
}

fn min_max(v: &[f64], what: &'static str) -> Result<(f64, f64)> {
    if v.is_empty() {
        return Err(TnbsError::Input(format!("empty {what} signal")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(TnbsError::Input(format!("non-finite value in {what} signal")));
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo >= hi {
        return Err(TnbsError::DegenerateScaling(what));
    }
    Ok((lo, hi))
}

/// Scaled regressor rows (row-major, `d` columns) with their scaled targets.
/// Row `i` belongs to sample `start + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub d: usize,
    pub start: usize,
    pub rows: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Regressors {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Column `p` (the p-th regressor over all rows).
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.rows.iter().skip(p).step_by(self.d).copied().collect()
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Regressors {
        let mut rows = Vec::with_capacity(idx.len() * self.d);
        let mut targets = Vec::with_capacity(idx.len());
        for &i in idx {
            rows.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Regressors { d: self.d, start: self.start, rows, targets }
    }
}

fn check_signals(u: &[f64], y: &[f64], lags: &LagSpec) -> Result<()> {
    if u.len() != y.len() {
        return Err(TnbsError::mismatch("input vs output signal length", u.len(), y.len()));
    }
    let needed = lags.max_lag() + 1;
    if u.len() < needed {
        return Err(TnbsError::InsufficientData { needed, available: u.len() });
    }
    Ok(())
}

/// Lagged, scaled regressors for every sample from `lags.start_index()` on.
pub fn build_regressors(u: &[f64], y: &[f64], lags: &LagSpec, scaling: &Scaling) -> Result<Regressors> {
    check_signals(u, y, lags)?;
    let start = lags.start_index();
    let d = lags.dim();
    let n = u.len() - start;
    let mut rows = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for t in start..u.len() {
        rows.extend(lags.input_lags.iter().map(|&l| scaling.apply_u(u[t - l])));
        rows.extend(lags.output_lags.iter().map(|&l| scaling.apply_y(y[t - l])));
        targets.push(scaling.apply_y(y[t]));
    }
    Ok(Regressors { d, start, rows, targets })
}

/// Root mean squared error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(TnbsError::mismatch("rmse signal lengths", y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(TnbsError::Input("rmse of empty signals".into()));
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Free-run output for samples `start..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub start: usize,
    pub outputs: Vec<f64>,
    /// Simulated outputs that left the scaled range and were clipped before
    /// being fed back.
    pub clipped: usize,
}

/// An identified NARX system `y_n = S(regressors)` with `S` a TNBS surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TnbsModel {
    basis: BasisConfig,
    lags: LagSpec,
    weights: TensorTrain,
    scaling: Scaling,
}

impl TnbsModel {
    pub fn new(basis: BasisConfig, lags: LagSpec, weights: TensorTrain, scaling: Scaling) -> Result<Self> {
        if weights.order() != lags.dim() {
            return Err(TnbsError::mismatch("weight cores vs regressor count", weights.order(), lags.dim()));
        }
        let k = basis.basis_count();
        if let Some(bad) = weights.extents().into_iter().find(|&e| e != k) {
            return Err(TnbsError::mismatch("core extent vs basis count", bad, k));
        }
        scaling.validate()?;
        Ok(Self { basis, lags, weights, scaling })
    }

    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    pub fn lags(&self) -> &LagSpec {
        &self.lags
    }

    pub fn weights(&self) -> &TensorTrain {
        &self.weights
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn dim(&self) -> usize {
        self.lags.dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.parameter_count()
    }

    /// Surface value at a point given in scaled units: the product over
    /// cores of `G_p x_2 b(x_p)`.
    pub fn eval_surface(&self, x: &[f64]) -> Result<f64> {
        let mut scratch = SurfaceScratch::new(self);
        self.eval_with(x, &mut scratch)
    }

    fn eval_with(&self, x: &[f64], s: &mut SurfaceScratch) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(TnbsError::mismatch("point dimension vs model dimension", x.len(), self.dim()));
        }
        s.v.clear();
        s.v.push(1.0);
        for (core, &xp) in self.weights.cores().iter().zip(x) {
            self.basis.eval_into(xp, &mut s.b)?;
            let (r0, k, r1) = dims(core);
            let g = core.values();
            s.next.clear();
            s.next.resize(r1, 0.0);
            for (i, &bi) in s.b.iter().enumerate() {
                if bi == 0.0 {
                    continue;
                }
                for (beta, out) in s.next.iter_mut().enumerate() {
                    let col = &g[r0 * (i + k * beta)..r0 * (i + k * beta) + r0];
                    let dot: f64 = col.iter().zip(&s.v).map(|(a, b)| a * b).sum();
                    *out += bi * dot;
                }
            }
            std::mem::swap(&mut s.v, &mut s.next);
        }
        Ok(s.v[0])
    }

    /// Surface values for each row of a regressor block.
    pub fn eval_rows(&self, reg: &Regressors, exec: Execution) -> Result<Vec<f64>> {
        if reg.d != self.dim() {
            return Err(TnbsError::mismatch("regressor width vs model dimension", reg.d, self.dim()));
        }
        let parts = exec.map_chunks(reg.len(), CHUNK_ROWS, |range| {
            let mut s = SurfaceScratch::new(self);
            range.map(|i| self.eval_with(reg.row(i), &mut s)).collect::<Result<Vec<f64>>>()
        });
        let mut out = Vec::with_capacity(reg.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// One-step-ahead predictions (original units) for samples
    /// `lags.start_index()..N`, using measured lagged outputs.
    pub fn predict(&self, u: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.predict_with(u, y, Execution::default())
    }

    pub fn predict_with(&self, u: &[f64], y: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let reg = build_regressors(u, y, &self.lags, &self.scaling)?;
        Ok(self
            .eval_rows(&reg, exec)?
            .into_iter()
            .map(|s| self.scaling.descale_y(s))
            .collect())
    }

    /// Free-run simulation. `y_warmup` seeds the output history; simulation
    /// starts at sample `y_warmup.len()`, which must be at least the largest
    /// lag. Lagged outputs come from earlier simulated values, clipped to the
    /// scaled unit interval.
    pub fn simulate(&self, u: &[f64], y_warmup: &[f64]) -> Result<Simulation> {
        let start = y_warmup.len();
        if start < self.lags.max_lag() {
            return Err(TnbsError::InsufficientData { needed: self.lags.max_lag(), available: start });
        }
        if u.len() < start {
            return Err(TnbsError::InsufficientData { needed: start, available: u.len() });
        }
        if u.iter().chain(y_warmup).any(|v| !v.is_finite()) {
            return Err(TnbsError::Input("non-finite value in simulation input".into()));
        }
        let mut hist: Vec<f64> = y_warmup.iter().map(|&y| self.scaling.apply_y(y)).collect();
        hist.reserve(u.len() - start);
        let mut outputs = Vec::with_capacity(u.len() - start);
        let mut row = vec![0.0; self.dim()];
        let mut scratch = SurfaceScratch::new(self);
        let mut clipped = 0;
        for t in start..u.len() {
            let n_in = self.lags.input_lags.len();
            for (slot, &l) in row[..n_in].iter_mut().zip(&self.lags.input_lags) {
                *slot = self.scaling.apply_u(u[t - l]);
            }
            for (slot, &l) in row[n_in..].iter_mut().zip(&self.lags.output_lags) {
                *slot = hist[t - l];
            }
            let s = self.eval_with(&row, &mut scratch)?;
            if !s.is_finite() {
                return Err(TnbsError::Numerical(format!("non-finite simulated output at sample {t}")));
            }
            outputs.push(self.scaling.descale_y(s));
            if !(0.0..=1.0).contains(&s) {
                clipped += 1;
            }
            hist.push(s.clamp(0.0, 1.0));
        }
        Ok(Simulation { start, outputs, clipped })
    }
}

struct SurfaceScratch {
    b: Vec<f64>,
    v: Vec<f64>,
    next: Vec<f64>,
}

impl SurfaceScratch {
    fn new(model: &TnbsModel) -> Self {
        Self {
            b: vec![0.0; model.basis.basis_count()],
            v: Vec::new(),
            next: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;

    fn constant_model(d: usize, c: f64) -> TnbsModel {
        let basis = BasisConfig::new(2, 6).unwrap();
        let weights = TensorTrain::from_fn(&vec![4; d], &vec![1; d - 1], |p, _| if p == 0 { c } else { 1.0 }).unwrap();
        let lags = LagSpec::new((1..=d).collect(), vec![]).unwrap();
        TnbsModel::new(basis, lags, weights, Scaling::identity()).unwrap()
    }

    #[test]
    fn lag_spec_validation() {
        assert!(LagSpec::new(vec![0, 1], vec![0]).is_err());
        assert!(LagSpec::new(vec![], vec![]).is_err());
        let l = LagSpec::new(vec![3, 1, 1], vec![2]).unwrap();
        assert_eq!(l.input_lags(), &[1, 3]);
        assert_eq!(l.dim(), 3);
        assert_eq!(l.max_lag(), 3);
        assert_eq!(l.max_output_lag(), 2);
    }

    #[test]
    fn scaling_cases() {
        let s = Scaling::fit(&[0.0, 1.0], &[2.0, 4.0]).unwrap();
        assert_eq!(s.apply_u(0.3), 0.3);
        assert_eq!(s.apply_y(3.0), 0.5);
        assert_eq!(s.descale_y(0.5), 3.0);
        assert_eq!(Scaling::fit(&[1.0, 1.0], &[0.0, 1.0]), Err(TnbsError::DegenerateScaling("input")));
        assert_eq!(Scaling::fit(&[0.0, 1.0], &[5.0, 5.0]), Err(TnbsError::DegenerateScaling("output")));
        assert!(Scaling::fit(&[], &[]).is_err());
    }

    #[test]
    fn regressors_worked_example() {
        // y_n = f(u_n, u_{n-1}, y_{n-1}) with N = 3
        let lags = LagSpec::new(vec![0, 1], vec![1]).unwrap();
        let u = [0.0, 0.5, 1.0];
        let y = [0.0, 0.25, 1.0];
        let r = build_regressors(&u, &y, &lags, &Scaling::identity()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.targets, vec![0.25, 1.0]);
        assert_eq!(r.row(0), &[0.5, 0.0, 0.0]);
        assert_eq!(r.row(1), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn regressors_hand_indexed() {
        let u: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let lags = LagSpec::new(vec![1], vec![1, 2]).unwrap();
        let s = Scaling::fit(&u, &y).unwrap();
        let r = build_regressors(&u, &y, &lags, &s).unwrap();
        assert_eq!(r.start, 2);
        assert_eq!(r.len(), 8);
        for i in 0..8 {
            let n = i + 2;
            let expect = [s.apply_u(u[n - 1]), s.apply_y(y[n - 1]), s.apply_y(y[n - 2])];
            assert_eq!(r.row(i), &expect);
            assert_eq!(r.targets[i], s.apply_y(y[n]));
        }
    }

    #[test]
    fn regressors_constant_and_errors() {
        let lags = LagSpec::new(vec![1], vec![1]).unwrap();
        let r = build_regressors(&[0.5; 5], &[0.25; 5], &lags, &Scaling::identity()).unwrap();
        assert!(r.rows.iter().all(|&v| v == 0.5 || v == 0.25));
        assert!(r.targets.iter().all(|&v| v == 0.25));
        assert!(matches!(
            build_regressors(&[0.0], &[0.0], &lags, &Scaling::identity()),
            Err(TnbsError::InsufficientData { needed: 2, available: 1 })
        ));
        assert!(build_regressors(&[0.0; 3], &[0.0; 4], &lags, &Scaling::identity()).is_err());
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((rmse(&[0.0, 3.0], &[0.0, 0.0]).unwrap() - 4.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_dimension_is_b_dot_w() {
        let basis = BasisConfig::new(3, 7).unwrap();
        let w = [0.3, -1.0, 2.0, 0.7];
        let core = DenseTensor::new(vec![1, 4, 1], w.to_vec()).unwrap();
        let tt = TensorTrain::new(vec![core]).unwrap();
        let m = TnbsModel::new(basis.clone(), LagSpec::new(vec![0], vec![]).unwrap(), tt, Scaling::identity()).unwrap();
        for x in [0.0, 0.2, 0.55, 1.0] {
            let b = basis.eval(x).unwrap();
            let expect: f64 = b.iter().zip(&w).map(|(a, c)| a * c).sum();
            assert!((m.eval_surface(&[x]).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_surface() {
        let m = constant_model(3, 2.5);
        for x in [[0.0, 0.0, 0.0], [0.3, 0.9, 1.0], [0.5, 0.5, 0.5]] {
            assert!((m.eval_surface(&x).unwrap() - 2.5).abs() < 1e-12);
        }
        assert!(m.eval_surface(&[0.1, 0.2]).is_err());
        let u: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let preds = m.predict(&u, &u).unwrap();
        assert_eq!(preds.len(), 17);
        assert!(preds.iter().all(|p| (p - 2.5).abs() < 1e-12));
    }

    #[test]
    fn simulate_without_output_lags_equals_predict() {
        let m = constant_model(2, 0.7);
        let u: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let y = vec![0.0; 30];
        let p = m.predict(&u, &y).unwrap();
        let s = m.simulate(&u, &y[..2]).unwrap();
        assert_eq!(s.start, 2);
        assert_eq!(s.outputs, p);
        assert!(m.simulate(&u, &y[..1]).is_err());
    }

    #[test]
    fn model_validation() {
        let basis = BasisConfig::new(2, 6).unwrap();
        let tt = TensorTrain::from_fn(&[4, 3], &[1], |_, _| 1.0).unwrap();
        let lags = LagSpec::new(vec![1], vec![1]).unwrap();
        assert!(TnbsModel::new(basis.clone(), lags.clone(), tt, Scaling::identity()).is_err());
        let tt = TensorTrain::from_fn(&[4], &[], |_, _| 1.0).unwrap();
        assert!(TnbsModel::new(basis, lags, tt, Scaling::identity()).is_err());
    }
}
