//! Runs over a grid of regularization strengths.

use crate::error::{Error, Result};
use crate::estimator::{evaluate, fit, weight_update, FitConfig};
use crate::model::{Dataset, MixtureModel};
use crate::transport::Regularizer;

/// Parses either `geometric:lo,hi,steps` or a comma-separated list. The
/// result is nonempty, nonnegative and sorted ascending.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let grid = text.trim();
    let invalid = |msg: String| Error::InvalidConfig(format!("lambda grid `{grid}`: {msg}"));
    let values = if let Some(rest) = grid.strip_prefix("geometric:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(invalid("expected geometric:lo,hi,steps".into()));
        }
        let lo: f64 = parts[0].parse().map_err(|_| invalid(format!("bad lower bound `{}`", parts[0])))?;
        let hi: f64 = parts[1].parse().map_err(|_| invalid(format!("bad upper bound `{}`", parts[1])))?;
        let steps: usize = parts[2].parse().map_err(|_| invalid(format!("bad step count `{}`", parts[2])))?;
        if !(lo > 0.0 && hi.is_finite() && hi >= lo) {
            return Err(invalid("geometric bounds need 0 < lo <= hi".into()));
        }
        if steps == 0 || (steps == 1 && lo != hi) {
            return Err(invalid("geometric grid needs at least 2 steps".into()));
        }
        geometric(lo, hi, steps)
    } else {
        grid.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| invalid(format!("bad value `{s}`"))))
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(invalid("no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(invalid(format!("{v} is not a nonnegative finite number")));
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("values must be sorted ascending".into()));
    }
    Ok(values)
}

fn geometric(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut values: Vec<f64> = (0..steps)
        .map(|s| (a + (b - a) * s as f64 / (steps - 1) as f64).exp())
        .collect();
    values[0] = lo;
    values[steps - 1] = hi;
    values
}

#[derive(Debug, Clone)]
pub enum SweepMode {
    /// A complete fit per value, each from the same seeded initialization.
    FullFit { k: usize },
    /// A single plan update at a fixed model.
    OneStep { model: MixtureModel },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStatus {
    Converged,
    MaxIterations,
    OneStep,
    Degenerate,
    Invalid,
    Io,
}

impl SweepStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SweepStatus::Converged => "converged",
            SweepStatus::MaxIterations => "max_iters",
            SweepStatus::OneStep => "one_step",
            SweepStatus::Degenerate => "degenerate",
            SweepStatus::Invalid => "invalid",
            SweepStatus::Io => "io_error",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, SweepStatus::Degenerate | SweepStatus::Invalid | SweepStatus::Io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub status: SweepStatus,
    /// `None` when the run failed.
    pub objective: Option<f64>,
    pub iterations: usize,
    /// Indexed by the original component number, zero for pruned components.
    pub weights: Vec<f64>,
    pub mean_row_entropy: Option<f64>,
    pub message: Option<String>,
}

/// One row per value of `lambdas`, in order. Failures are recorded in their
/// row and do not stop the sweep.
pub fn sweep(data: &Dataset, lambdas: &[f64], mode: &SweepMode, config: &FitConfig) -> Vec<SweepRow> {
    let k = match mode {
        SweepMode::FullFit { k } => *k,
        SweepMode::OneStep { model } => model.k(),
    };
    lambdas
        .iter()
        .map(|&lambda| {
            let config = config.clone().with_lambda(lambda);
            let outcome = match mode {
                SweepMode::FullFit { k } => full_fit_row(data, *k, &config),
                SweepMode::OneStep { model } => one_step_row(data, model, &config),
            };
            outcome.unwrap_or_else(|err| {
                log::warn!("lambda {lambda}: {err}");
                SweepRow {
                    lambda,
                    status: match err.kind() {
                        crate::error::ErrorKind::Degenerate => SweepStatus::Degenerate,
                        crate::error::ErrorKind::Io => SweepStatus::Io,
                        crate::error::ErrorKind::Validation => SweepStatus::Invalid,
                    },
                    objective: None,
                    iterations: 0,
                    weights: vec![0.0; k],
                    mean_row_entropy: None,
                    message: Some(err.to_string()),
                }
            })
        })
        .collect()
}

fn full_fit_row(data: &Dataset, k: usize, config: &FitConfig) -> Result<SweepRow> {
    let result = fit(data, k, config)?;
    let mut weights = vec![0.0; k];
    for (&id, &w) in result.trace.active.iter().zip(result.model.weights()) {
        weights[id] = w;
    }
    Ok(SweepRow {
        lambda: config.lambda,
        status: match result.trace.status {
            crate::estimator::FitStatus::Converged => SweepStatus::Converged,
            crate::estimator::FitStatus::MaxIterations => SweepStatus::MaxIterations,
        },
        objective: Some(result.trace.final_objective),
        iterations: result.trace.iterations(),
        weights,
        mean_row_entropy: Some(crate::transport::mean_row_entropy(&result.plan)),
        message: None,
    })
}

fn one_step_row(data: &Dataset, model: &MixtureModel, config: &FitConfig) -> Result<SweepRow> {
    let reg = Regularizer::resolve(config.penalty, config.lambda)?;
    let eval = evaluate(model, data, &reg)?;
    Ok(SweepRow {
        lambda: config.lambda,
        status: SweepStatus::OneStep,
        objective: Some(eval.objective),
        iterations: 0,
        weights: weight_update(&eval.plan).to_vec(),
        mean_row_entropy: Some(eval.mean_row_entropy),
        message: None,
    })
}
