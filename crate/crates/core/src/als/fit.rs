use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::penalty::{difference_matrix, PenaltyBlocks};
use super::subproblem::{propagate_left, propagate_right, solve_penalized, Batch, CoreProblem, SolveInfo};
use crate::bspline::{BasisConfig, BasisRows};
use crate::error::{Result, TnbsError};
use crate::exec::Execution;
use crate::model::{build_regressors, LagSpec, Regressors, Scaling, TnbsModel};
use crate::tensor::{dims, ShiftDirection, TensorTrain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Interior ranks `(r_1, ..., r_{d-1})`.
    pub ranks: Vec<usize>,
    pub penalty_order: usize,
    /// One smoothing parameter per regressor.
    pub lambdas: Vec<f64>,
    pub max_sweeps: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub batch_size: Option<usize>,
    /// Fixed scaling; fitted from the data when `None`.
    pub scaling: Option<Scaling>,
    #[serde(skip)]
    pub execution: Execution,
}

impl FitConfig {
    /// Same rank on every interface and the same λ on every dimension.
    pub fn uniform(d: usize, rank: usize, penalty_order: usize, lambda: f64, max_sweeps: usize) -> Self {
        Self {
            ranks: vec![rank; d.saturating_sub(1)],
            penalty_order,
            lambdas: vec![lambda; d],
            max_sweeps,
            epsilon: 0.0,
            seed: 0,
            batch_size: None,
            scaling: None,
            execution: Execution::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, d: usize, k: usize) -> Result<()> {
        if self.ranks.len() + 1 != d {
            return Err(TnbsError::mismatch("interior rank count vs d-1", self.ranks.len(), d.saturating_sub(1)));
        }
        if self.ranks.contains(&0) {
            return Err(TnbsError::Config("ranks must be >= 1".into()));
        }
        if self.lambdas.len() != d {
            return Err(TnbsError::mismatch("lambda count vs d", self.lambdas.len(), d));
        }
        if self.lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(TnbsError::Config("smoothing parameters must be finite and >= 0".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(TnbsError::Config("epsilon must be >= 0".into()));
        }
        if self.max_sweeps == 0 {
            return Err(TnbsError::Config("max_sweeps must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(TnbsError::Config("batch size must be >= 1".into()));
        }
        if self.penalty_order >= k {
            return Err(TnbsError::Config(format!(
                "penalty order {} must be smaller than the basis count {k}",
                self.penalty_order
            )));
        }
        if let Some(s) = &self.scaling {
            s.validate()?;
        }
        Ok(())
    }
}

/// One core update. `objective` is the regularized training cost after the
/// update (scaled units, summed squared residuals plus penalty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub sweep: usize,
    pub core: usize,
    pub objective: f64,
    /// `None` when the system was singular.
    pub condition: Option<f64>,
    pub pseudo_inverse: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepTrace {
    /// Cost after the first update of each sweep.
    pub sweep_objectives: Vec<f64>,
    pub updates: Vec<UpdateRecord>,
    pub sweeps: usize,
    /// True when the stopping tolerance ended the fit.
    pub converged: bool,
    /// Regressor values outside the unit interval that were clipped.
    pub clipped_regressors: usize,
    pub pseudo_inverse_solves: usize,
}

impl SweepTrace {
    pub fn final_objective(&self) -> Option<f64> {
        self.updates.last().map(|u| u.objective)
    }
}

/// Random cores `N(0, 1) / sqrt(r_{p-1} k)` brought to site-0 canonical form.
pub fn initial_train(extents: &[usize], ranks: &[usize], seed: u64) -> Result<TensorTrain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full: Vec<usize> = std::iter::once(1).chain(ranks.iter().copied()).collect();
    let tt = TensorTrain::from_fn(extents, ranks, |p, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z / ((full[p] * extents[p]) as f64).sqrt()
    })?;
    tt.orthogonalize_to_site(0)
}

/// Fits a TNBS model to one input/output record.
pub fn als_fit(u: &[f64], y: &[f64], lags: &LagSpec, basis: &BasisConfig, cfg: &FitConfig) -> Result<(TnbsModel, SweepTrace)> {
    if u.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(TnbsError::Input("non-finite value in training signals".into()));
    }
    let scaling = match cfg.scaling {
        Some(s) => s,
        None => Scaling::fit(u, y)?,
    };
    let reg = build_regressors(u, y, lags, &scaling)?;
    let (tt, trace) = fit_regressors(&reg, basis, cfg)?;
    Ok((TnbsModel::new(basis.clone(), lags.clone(), tt, scaling)?, trace))
}

/// ALS on prebuilt (scaled) regressors.
pub fn fit_regressors(reg: &Regressors, basis: &BasisConfig, cfg: &FitConfig) -> Result<(TensorTrain, SweepTrace)> {
    let d = reg.d;
    let k = basis.basis_count();
    cfg.validate(d, k)?;
    if reg.is_empty() {
        return Err(TnbsError::InsufficientData { needed: 1, available: 0 });
    }
    let exec = cfg.execution;
    let n = reg.len();
    let rows = (0..d)
        .map(|q| basis.rows_with(&reg.column(q), exec))
        .collect::<Result<Vec<BasisRows>>>()?;
    let mut trace = SweepTrace {
        clipped_regressors: rows.iter().map(BasisRows::clipped).sum(),
        ..SweepTrace::default()
    };

    let mut tt = initial_train(&vec![k; d], &cfg.ranks, cfg.seed)?;
    let dmat = difference_matrix(k, cfg.penalty_order)?;
    let dtd = dmat.transpose() * &dmat;
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(1);

    let mut left: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut right: Vec<Vec<f64>> = vec![Vec::new(); d];
    left[0] = vec![1.0; n];
    right[d - 1] = vec![1.0; n];
    for q in (1..d).rev() {
        right[q - 1] = propagate_right(tt.core(q), &rows[q], &right[q], exec);
    }

    let schedule: Vec<(usize, Option<ShiftDirection>)> = if d == 1 {
        vec![(0, None)]
    } else {
        (0..d - 1)
            .map(|p| (p, Some(ShiftDirection::Right)))
            .chain((1..d).rev().map(|p| (p, Some(ShiftDirection::Left))))
            .collect()
    };

    let mut previous: Option<f64> = None;
    for sweep in 0..cfg.max_sweeps {
        for (step, &(p, shift)) in schedule.iter().enumerate() {
            let (r0, _, r1) = dims(tt.core(p));
            let problem = CoreProblem {
                left: &left[p],
                right: &right[p],
                basis: &rows[p],
                targets: &reg.targets,
                r0,
                k,
                r1,
            };
            let subset;
            let batch = match cfg.batch_size {
                Some(b) if b < n => {
                    let mut idx = index::sample(&mut batch_rng, n, b).into_vec();
                    idx.sort_unstable();
                    subset = idx;
                    Batch::Subset(&subset)
                }
                _ => Batch::All(n),
            };
            let (gram, rhs) = problem.normal_equations(batch, exec);
            let blocks = PenaltyBlocks::new(&tt, &dtd, p, &cfg.lambdas)?;
            let mut pen = DMatrix::zeros(gram.nrows(), gram.ncols());
            blocks.add_to(&mut pen);
            let current = DVector::from_column_slice(tt.core(p).values());
            let (g, info) = solve_penalized(&(gram + &pen), &rhs, &pen, Some(&current), || problem.matrix(batch))?;
            let objective = problem.residual_sq(g.as_slice(), Batch::All(n), exec) + g.dot(&(&pen * &g));
            record(&mut trace, sweep, p, objective, info);
            if step == 0 {
                trace.sweep_objectives.push(objective);
            }
            tt.set_core_values(p, g.as_slice())?;

            match shift {
                Some(ShiftDirection::Right) => {
                    tt.shift_core_in_place(p, ShiftDirection::Right)?;
                    left[p + 1] = propagate_left(tt.core(p), &rows[p], &left[p], exec);
                }
                Some(ShiftDirection::Left) => {
                    tt.shift_core_in_place(p, ShiftDirection::Left)?;
                    right[p - 1] = propagate_right(tt.core(p), &rows[p], &right[p], exec);
                }
                None => {}
            }
        }
        trace.sweeps = sweep + 1;
        let current = *trace.sweep_objectives.last().expect("one objective per sweep");
        if !current.is_finite() {
            return Err(TnbsError::Numerical(format!("objective became non-finite in sweep {}", sweep + 1)));
        }
        if let Some(prev) = previous {
            if (prev - current).abs() <= cfg.epsilon {
                trace.converged = true;
                break;
            }
        }
        previous = Some(current);
    }
    Ok((tt, trace))
}

fn record(trace: &mut SweepTrace, sweep: usize, core: usize, objective: f64, info: SolveInfo) {
    trace.pseudo_inverse_solves += usize::from(info.pseudo_inverse);
    trace.updates.push(UpdateRecord {
        sweep,
        core,
        objective,
        condition: info.condition.is_finite().then_some(info.condition),
        pseudo_inverse: info.pseudo_inverse,
    });
}

/// Regularized training cost of a train canonical at `p`, computed from
/// scratch (used by tests and diagnostics).
pub fn objective(tt: &TensorTrain, reg: &Regressors, basis: &BasisConfig, cfg: &FitConfig) -> Result<f64> {
    let p = tt
        .canonical_site()
        .ok_or(TnbsError::CanonicalSite { expected: 0, found: None })?;
    let k = basis.basis_count();
    let rows = (0..reg.d)
        .map(|q| basis.rows_with(&reg.column(q), cfg.execution))
        .collect::<Result<Vec<BasisRows>>>()?;
    let ifs = super::subproblem::Interfaces::for_core(tt, &rows, p, cfg.execution);
    let (r0, _, r1) = dims(tt.core(p));
    let problem = CoreProblem {
        left: &ifs.left[p],
        right: &ifs.right[p],
        basis: &rows[p],
        targets: &reg.targets,
        r0,
        k,
        r1,
    };
    let dmat = difference_matrix(k, cfg.penalty_order)?;
    let blocks = PenaltyBlocks::new(tt, &(dmat.transpose() * &dmat), p, &cfg.lambdas)?;
    let g = DVector::from_column_slice(tt.core(p).values());
    Ok(problem.residual_sq(g.as_slice(), Batch::All(reg.len()), cfg.execution) + blocks.quadratic(&g))
}
