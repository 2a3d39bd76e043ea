//! Mixture model estimation by regularized optimal transport.
//!
//! The fitted objective couples the empirical distribution of the data and a
//! mixture of exponential-family components through a transport plan whose
//! row sums are fixed. A single strength `lambda` moves the estimator from hard
//! clustering (`lambda = 0`) through EM (`lambda = 1`, entropic penalty) to
//! uniform-weight maximum likelihood (`lambda -> infinity`).

pub mod error;
pub mod estimator;
pub mod family;
pub mod init;
pub mod io;
pub mod model;
pub mod sweep;
pub mod transport;

pub use error::{Error, ErrorKind, Result};
pub use estimator::{
    evaluate, fit, fit_from, fit_observed, m_step, objective, prune, weight_update, Evaluation, FitConfig,
    FitResult, FitStatus, FitTrace, IterationRecord, IterationState, Pruned,
};
pub use family::{bregman_div, ConvexFunction, ExpectationParameter, Family, NaturalParameter, BOUNDARY_EPS};
pub use init::{initialize, InitMethod};
pub use io::{load_csv, load_model, sample_mixture, save_model, CsvOptions, ModelDocument, Sample};
pub use model::{Dataset, MixtureModel};
pub use sweep::{parse_lambda_grid, sweep, SweepMode, SweepRow, SweepStatus};
pub use transport::{
    cost_matrix, estep_entropic, estep_entropic_cost, estep_hard, estep_quadratic, log_likelihoods,
    mean_row_entropy, plan_entropy, CostMatrix, PenaltyKind, Regularizer, TransportPlan, LAMBDA_MIN,
};
