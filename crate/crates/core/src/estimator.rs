//! Alternating minimization of the relaxed transport objective
//!
//! ```text
//! -sum_ij pi_ij log(omega_j p_j(x_i)) + lambda * phi(pi)
//! ```
//!
//! over plans with fixed row sums, weights on the simplex, and component
//! parameters. Each iteration runs three exact block updates in order: the
//! plan (E-step), the weights `omega = pi^T 1`, and the parameters, which for
//! an exponential family are the plan-weighted means of the data (M-step).
//! With `lambda = 0` this is hard clustering (Lloyd's k-means for the
//! Gaussian family), with `lambda = 1` and the entropic penalty it is EM, and
//! large `lambda` drives the weights towards uniform.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::init::{initialize, InitMethod};
use crate::model::{Dataset, MixtureModel};
use crate::transport::{
    cost_entry, cost_matrix, log_likelihoods, mean_row_entropy, PenaltyKind, Regularizer, TransportPlan,
};

const PARALLEL_MIN_ENTRIES: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub lambda: f64,
    pub penalty: PenaltyKind,
    pub max_iters: usize,
    /// Stop once `|obj_t - obj_{t-1}| <= rel_tol * (1 + |obj_{t-1}|)`.
    pub rel_tol: f64,
    pub seed: u64,
    pub init: InitMethod,
    /// Components whose weight falls to or below this are removed.
    pub prune_threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 1.0,
            penalty: PenaltyKind::Entropic,
            max_iters: 500,
            rel_tol: 1e-8,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
            prune_threshold: 1e-12,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "prune_threshold must lie in [0, 1), got {}",
                self.prune_threshold
            )));
        }
        self.regularizer().map(|_| ())
    }

    pub fn regularizer(&self) -> Result<Regularizer> {
        Regularizer::resolve(self.penalty, self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIterations,
}

impl FitStatus {
    pub fn name(&self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIterations => "max_iters",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "converged" => Some(FitStatus::Converged),
            "max_iters" => Some(FitStatus::MaxIterations),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Weights indexed by the original component number; pruned components read 0.
    pub weights: Vec<f64>,
    pub mean_row_entropy: f64,
    pub k_active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    pub status: FitStatus,
    /// Objective at the returned model, minimized over plans.
    pub final_objective: f64,
    /// Original indices of the components still active at the end.
    pub active: Vec<usize>,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    /// Plan update at the returned model.
    pub plan: TransportPlan,
    pub trace: FitTrace,
}

/// State after the parameter update of one iteration.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: usize,
    /// Plan computed by this iteration's E-step (pruned columns removed).
    pub plan: &'a TransportPlan,
    pub model: &'a MixtureModel,
    pub objective: f64,
    /// Original indices of the active components, aligned with the model.
    pub active: &'a [usize],
    /// Original indices removed during this iteration.
    pub pruned: &'a [usize],
}

/// Relaxed objective `sum_ij pi_ij gamma_ij + lambda phi(pi)`. Entries with
/// `pi_ij = 0` contribute nothing, so zero-weight components are allowed as
/// long as they receive no mass.
pub fn objective(model: &MixtureModel, data: &Dataset, plan: &TransportPlan, reg: &Regularizer) -> Result<f64> {
    if plan.k() != model.k() || plan.n() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len() * model.k(),
            found: plan.n() * plan.k(),
        });
    }
    let loglik = log_likelihoods(model, data)?;
    let weights = model.weights();
    let pi = plan.pi();
    let mut total = 0.0;
    for i in 0..plan.n() {
        for j in 0..plan.k() {
            let p = pi[[i, j]];
            if p == 0.0 {
                continue;
            }
            if weights[j] <= 0.0 {
                return Err(Error::DegenerateModel { component: j });
            }
            total += p * cost_entry(weights[j], loglik[[i, j]]);
        }
    }
    Ok(total + reg.penalty(pi))
}

/// `omega_j = sum_i pi_ij`.
pub fn weight_update(plan: &TransportPlan) -> Array1<f64> {
    let pi = plan.pi();
    let mut weights = Array1::zeros(plan.k());
    for row in pi.rows() {
        weights += &row;
    }
    weights
}

/// Plan-weighted means `xi_j = sum_i (pi_ij / omega_j) x_i`, clamped into the
/// interior of the expectation domain. These maximize `sum_i pi_ij log p_j(x_i)`.
pub fn m_step(plan: &TransportPlan, weights: &Array1<f64>, data: &Dataset) -> Result<Array2<f64>> {
    let family = data.family();
    let (n, k) = (plan.n(), plan.k());
    if weights.len() != k || n != data.len() {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: weights.len(),
        });
    }
    if let Some(j) = weights.iter().position(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::DegenerateModel { component: j });
    }
    let pi = plan.pi();
    let points = data.points();
    let component = |j: usize| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; data.dim()];
        for i in 0..n {
            let p = pi[[i, j]];
            if p == 0.0 {
                continue;
            }
            for (a, x) in acc.iter_mut().zip(points.row(i)) {
                *a += p * x;
            }
        }
        acc.iter_mut().for_each(|a| *a /= weights[j]);
        Ok(family.clamp_expectation(&acc)?.value.0)
    };
    let rows: Vec<Vec<f64>> = if n * k >= PARALLEL_MIN_ENTRIES {
        (0..k).into_par_iter().map(component).collect::<Result<_>>()?
    } else {
        (0..k).map(component).collect::<Result<_>>()?
    };
    let mut means = Array2::zeros((k, data.dim()));
    for (mut row, values) in means.rows_mut().into_iter().zip(rows) {
        row.assign(&Array1::from(values));
    }
    Ok(means)
}

#[derive(Debug, Clone)]
pub struct Pruned {
    pub model: MixtureModel,
    pub plan: TransportPlan,
    /// Indices (into the input model) of the retained components.
    pub kept: Vec<usize>,
}

/// Removes components whose weight is at most `threshold`. Rows that lose
/// mass are rescaled back to their empirical weight and the weights are
/// recomputed from the plan.
pub fn prune(model: &MixtureModel, plan: &TransportPlan, threshold: f64) -> Result<Pruned> {
    let weights = model.weights();
    let kept: Vec<usize> = (0..model.k()).filter(|&j| weights[j] > threshold).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateFit("every component was pruned".into()));
    }
    if kept.len() == model.k() {
        return Ok(Pruned {
            model: model.clone(),
            plan: plan.clone(),
            kept,
        });
    }
    let mut pi = plan.pi().select(Axis(1), &kept);
    let upsilon = plan.upsilon();
    for (mut row, &u) in pi.rows_mut().into_iter().zip(&upsilon) {
        let s = row.sum();
        if s == u {
            continue;
        }
        if s > 0.0 {
            row.mapv_inplace(|v| v * (u / s));
        } else {
            row.fill(u / kept.len() as f64);
        }
    }
    let plan = TransportPlan::from_parts(pi, upsilon.to_owned());
    let new_weights = weight_update(&plan);
    let means = model.means().select(Axis(0), &kept);
    let model = MixtureModel::new(model.family(), new_weights, means)?;
    Ok(Pruned { model, plan, kept })
}

/// Fits a `k`-component mixture, initializing from the data per `config`.
pub fn fit(data: &Dataset, k: usize, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let distinct = data.distinct_count();
    if distinct < k {
        return Err(Error::DegenerateFit(format!(
            "{k} components requested but the data has only {distinct} distinct observations"
        )));
    }
    let init = initialize(data, k, config.init, config.seed)?;
    fit_from(init, data, config)
}

/// Fits starting from a given model.
pub fn fit_from(model: MixtureModel, data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    fit_observed(model, data, config, |_| {})
}

/// Like [`fit_from`], calling `observer` after every iteration.
pub fn fit_observed<F>(model: MixtureModel, data: &Dataset, config: &FitConfig, mut observer: F) -> Result<FitResult>
where
    F: FnMut(&IterationState<'_>),
{
    config.validate()?;
    let reg = config.regularizer()?;
    let family = data.family();
    let initial_k = model.k();
    let mut model = model;
    let mut active: Vec<usize> = (0..initial_k).collect();
    let mut records = Vec::new();
    let mut previous: Option<f64> = None;
    let mut status = FitStatus::MaxIterations;

    for iteration in 1..=config.max_iters {
        let gamma = cost_matrix(&model, data)?;
        if let Some(j) = gamma.first_non_finite_column() {
            return Err(Error::NonFinite {
                iteration,
                component: Some(active[j]),
            });
        }
        let plan = reg.solve(&gamma, data.upsilon());
        let weights = weight_update(&plan);
        let weighted = MixtureModel::new(family, weights, model.means().to_owned())?;

        let mut pruned_ids = Vec::new();
        let (weighted, plan) = if weighted.weights().iter().any(|&w| w <= config.prune_threshold) {
            let pruned = prune(&weighted, &plan, config.prune_threshold)?;
            pruned_ids = (0..active.len())
                .filter(|j| !pruned.kept.contains(j))
                .map(|j| active[j])
                .collect();
            active = pruned.kept.iter().map(|&j| active[j]).collect();
            log::debug!("iteration {iteration}: pruned components {pruned_ids:?}");
            (pruned.model, pruned.plan)
        } else {
            (weighted, plan)
        };

        let weights = weighted.weights().to_owned();
        let means = m_step(&plan, &weights, data).map_err(|err| match err {
            Error::Domain { .. } => Error::NonFinite {
                iteration,
                component: None,
            },
            other => other,
        })?;
        model = MixtureModel::new(family, weights, means)?;

        let value = objective(&model, data, &plan, &reg)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                component: None,
            });
        }
        let mut by_original = vec![0.0; initial_k];
        for (&id, &w) in active.iter().zip(model.weights()) {
            by_original[id] = w;
        }
        let record = IterationRecord {
            iteration,
            objective: value,
            weights: by_original,
            mean_row_entropy: mean_row_entropy(&plan),
            k_active: model.k(),
        };
        log::debug!(
            "iteration {iteration}: objective {value:.12e}, k_active {}, mean row entropy {:.6}",
            record.k_active,
            record.mean_row_entropy
        );
        records.push(record);
        observer(&IterationState {
            iteration,
            plan: &plan,
            model: &model,
            objective: value,
            active: &active,
            pruned: &pruned_ids,
        });

        if let Some(prev) = previous {
            if (value - prev).abs() <= config.rel_tol * (1.0 + prev.abs()) {
                status = FitStatus::Converged;
                break;
            }
        }
        previous = Some(value);
    }

    let evaluation = evaluate(&model, data, &reg)?;
    Ok(FitResult {
        model,
        plan: evaluation.plan,
        trace: FitTrace {
            records,
            status,
            final_objective: evaluation.objective,
            active,
        },
    })
}

/// One plan update at a fixed model and the resulting diagnostics.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub plan: TransportPlan,
    pub objective: f64,
    /// Empirically weighted mean of `-log sum_j omega_j p_j(x_i)`.
    pub mean_nll: f64,
    pub mean_row_entropy: f64,
}

pub fn evaluate(model: &MixtureModel, data: &Dataset, reg: &Regularizer) -> Result<Evaluation> {
    let gamma = cost_matrix(model, data)?;
    let plan = reg.solve(&gamma, data.upsilon());
    let objective = objective(model, data, &plan, reg)?;
    let mean_nll = gamma
        .view()
        .rows()
        .into_iter()
        .zip(data.upsilon())
        .map(|(row, &u)| {
            // -log sum_j exp(-gamma_ij)
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let s: f64 = row.iter().map(|g| (min - g).exp()).sum();
            u * (min - s.ln())
        })
        .sum();
    Ok(Evaluation {
        mean_row_entropy: mean_row_entropy(&plan),
        plan,
        objective,
        mean_nll,
    })
}
