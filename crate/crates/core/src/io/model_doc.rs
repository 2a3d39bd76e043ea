use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{FitConfig, FitResult, FitStatus};
use crate::family::Family;
use crate::init::InitMethod;
use crate::io::table::format_real;
use crate::io::write_atomic;
use crate::model::{MixtureModel, SIMPLEX_TOL};
use crate::transport::PenaltyKind;

pub const MODEL_FORMAT: &str = "rotmix-model-v1";

/// Settings a model was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEcho(pub FitConfig);

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub status: FitStatus,
    pub iterations: usize,
    pub final_objective: f64,
}

/// A mixture model with an optional record of how it was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub model: MixtureModel,
    pub config: Option<ConfigEcho>,
    pub trace: Option<TraceSummary>,
}

impl ModelDocument {
    pub fn from_model(model: MixtureModel) -> Self {
        ModelDocument {
            model,
            config: None,
            trace: None,
        }
    }

    pub fn from_fit(result: &FitResult, config: &FitConfig) -> Self {
        ModelDocument {
            model: result.model.clone(),
            config: Some(ConfigEcho(config.clone())),
            trace: Some(TraceSummary {
                status: result.trace.status,
                iterations: result.trace.iterations(),
                final_objective: result.trace.final_objective,
            }),
        }
    }

    /// TOML text with a fixed key order and 17 significant digits per real.
    pub fn render(&self) -> Result<String> {
        let m = &self.model;
        let (weights, means) = (m.weights(), m.means());
        let reals = weights
            .iter()
            .chain(means.iter())
            .copied()
            .chain(self.config.iter().flat_map(|c| [c.0.lambda, c.0.rel_tol, c.0.prune_threshold]))
            .chain(self.trace.iter().map(|t| t.final_objective));
        for v in reals {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("cannot store non-finite value {v}")));
            }
        }
        let list = |values: &mut dyn Iterator<Item = f64>| {
            let items: Vec<String> = values.map(format_real).collect();
            format!("[{}]", items.join(", "))
        };
        let mut out = String::new();
        let _ = writeln!(out, "format = \"{MODEL_FORMAT}\"");
        let _ = writeln!(out, "family = \"{}\"", m.family().name());
        let _ = writeln!(out, "dim = {}", m.dim());
        let _ = writeln!(out, "k = {}", m.k());
        let _ = writeln!(out, "weights = {}", list(&mut weights.iter().copied()));
        let _ = writeln!(out, "means = [");
        for row in means.rows() {
            let _ = writeln!(out, "    {},", list(&mut row.iter().copied()));
        }
        let _ = writeln!(out, "]");
        if let Some(ConfigEcho(c)) = &self.config {
            let _ = writeln!(out, "\n[config]");
            let _ = writeln!(out, "lambda = {}", format_real(c.lambda));
            let _ = writeln!(out, "regularizer = \"{}\"", c.penalty.name());
            let _ = writeln!(out, "init = \"{}\"", c.init.name());
            // a string keeps the full u64 range
            let _ = writeln!(out, "seed = \"{}\"", c.seed);
            let _ = writeln!(out, "max_iters = {}", c.max_iters);
            let _ = writeln!(out, "rel_tol = {}", format_real(c.rel_tol));
            let _ = writeln!(out, "prune_threshold = {}", format_real(c.prune_threshold));
        }
        if let Some(t) = &self.trace {
            let _ = writeln!(out, "\n[trace]");
            let _ = writeln!(out, "status = \"{}\"", t.status.name());
            let _ = writeln!(out, "iterations = {}", t.iterations);
            let _ = writeln!(out, "final_objective = {}", format_real(t.final_objective));
        }
        Ok(out)
    }

    /// Parses a document; `source` is only used in error messages.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let invalid = |message: String| Error::ModelFormat {
            path: source.to_path_buf(),
            message,
        };
        let raw: RawDocument = toml::from_str(text).map_err(|e| invalid(e.to_string().trim_end().to_string()))?;
        if raw.format != MODEL_FORMAT {
            return Err(invalid(format!("unsupported format `{}`", raw.format)));
        }
        let family = Family::from_name(&raw.family, raw.dim).map_err(|e| invalid(e.to_string()))?;
        if raw.weights.len() != raw.k || raw.means.len() != raw.k {
            return Err(invalid(format!(
                "dimension mismatch: k = {} but {} weights and {} means",
                raw.k,
                raw.weights.len(),
                raw.means.len()
            )));
        }
        if let Some(j) = raw.means.iter().position(|row| row.len() != raw.dim) {
            return Err(invalid(format!(
                "dimension mismatch: mean {j} has {} coordinates, expected {}",
                raw.means[j].len(),
                raw.dim
            )));
        }
        let total: f64 = raw.weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        for (j, row) in raw.means.iter().enumerate() {
            if !family.expectation_domain(row) {
                return Err(invalid(format!("mean {j} = {row:?} is outside the {family} expectation domain")));
            }
        }
        let means = Array2::from_shape_vec((raw.k, raw.dim), raw.means.concat()).expect("k rows of dim values");
        let model = MixtureModel::new(family, Array1::from(raw.weights), means).map_err(|e| invalid(e.to_string()))?;

        let config = raw
            .config
            .map(|c| -> Result<ConfigEcho> {
                let config = FitConfig {
                    lambda: c.lambda,
                    penalty: PenaltyKind::from_name(&c.regularizer).map_err(|e| invalid(e.to_string()))?,
                    max_iters: c.max_iters,
                    rel_tol: c.rel_tol,
                    seed: c.seed.parse().map_err(|_| invalid(format!("bad seed `{}`", c.seed)))?,
                    init: InitMethod::from_name(&c.init).map_err(|e| invalid(e.to_string()))?,
                    prune_threshold: c.prune_threshold,
                };
                config.validate().map_err(|e| invalid(e.to_string()))?;
                Ok(ConfigEcho(config))
            })
            .transpose()?;
        let trace = raw
            .trace
            .map(|t| -> Result<TraceSummary> {
                Ok(TraceSummary {
                    status: FitStatus::from_name(&t.status)
                        .ok_or_else(|| invalid(format!("unknown status `{}`", t.status)))?,
                    iterations: t.iterations,
                    final_objective: t.final_objective,
                })
            })
            .transpose()?;
        Ok(ModelDocument { model, config, trace })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    format: String,
    family: String,
    dim: usize,
    k: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    config: Option<RawConfig>,
    trace: Option<RawTrace>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda: f64,
    regularizer: String,
    init: String,
    seed: String,
    max_iters: usize,
    rel_tol: f64,
    prune_threshold: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    status: String,
    iterations: usize,
    final_objective: f64,
}

pub fn save_model(document: &ModelDocument, path: &Path) -> Result<()> {
    write_atomic(path, document.render()?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelDocument::parse(&text, path)
}
