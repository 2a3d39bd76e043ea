use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated one of the family's domain predicates.
    #[error("{family}: value {value:?} violates the {predicate} domain")]
    Domain {
        family: String,
        predicate: &'static str,
        value: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown family `{0}` (expected gaussian_spherical, poisson, bernoulli or exponential)")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// A plan puts mass on a component whose weight is zero.
    #[error("degenerate model: component {component} has zero weight but receives mass")]
    DegenerateModel { component: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("cannot seed {requested} centers from {distinct} distinct data points")]
    Seeding { requested: usize, distinct: usize },

    #[error("non-finite objective at iteration {iteration}{}", component_suffix(*.component))]
    NonFinite {
        iteration: usize,
        component: Option<usize>,
    },

    #[error("{}: row {row}{}: {message}", path.display(), column_suffix(column))]
    Csv {
        path: PathBuf,
        row: usize,
        column: Option<String>,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    ModelFormat { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn component_suffix(component: Option<usize>) -> String {
    component.map(|j| format!(" (component {j})")).unwrap_or_default()
}

fn column_suffix(column: &Option<String>) -> String {
    column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default()
}

/// Coarse classification used for process exit codes and sweep statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The fit itself broke down: collapsed components, non-finite values,
    /// or too few distinct points to seed.
    Degenerate,
    Io,
    /// Bad input: flags, data, or model documents.
    Validation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateModel { .. } | Error::DegenerateFit(_) | Error::Seeding { .. } | Error::NonFinite { .. } => {
                ErrorKind::Degenerate
            }
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
