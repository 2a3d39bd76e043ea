//! Transport plans between the empirical distribution and the mixture.
//!
//! The plan update only constrains row sums (each observation ships exactly
//! its mass `upsilon_i`), so with a row-separable regularizer every row is an
//! independent problem
//!
//! ```text
//! min  <pi_i, gamma_i> + lambda * phi(pi_i)   s.t.  pi_i >= 0, sum_j pi_ij = upsilon_i
//! ```
//!
//! where `gamma_ij = -log(omega_j p_j(x_i))`. Three row solvers are provided:
//! the unregularized argmin (hard assignment), the entropic softmax, and the
//! quadratic penalty, which reduces to a Euclidean projection onto the scaled
//! simplex.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Zip};

use crate::error::{Error, Result};
use crate::family::{dot, ConvexFunction};
use crate::model::{Dataset, MixtureModel};

/// Below this penalty the entropic and quadratic solvers are replaced by the
/// hard assignment.
pub const LAMBDA_MIN: f64 = 1e-12;

/// Matrices with at least this many entries are solved row-parallel.
const PARALLEL_MIN_ENTRIES: usize = 1 << 14;

/// `gamma_ij = -log(omega_j) - log p_j(x_i)`, observations by components.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(pub Array2<f64>);

impl CostMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    /// First component whose cost column contains a non-finite entry.
    pub fn first_non_finite_column(&self) -> Option<usize> {
        self.0
            .columns()
            .into_iter()
            .position(|c| c.iter().any(|v| !v.is_finite()))
    }
}

/// Nonnegative `n x k` plan whose rows sum to the empirical weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pi: Array2<f64>,
    upsilon: Array1<f64>,
}

impl TransportPlan {
    /// Wraps a plan, checking nonnegativity and row sums within `1e-12`.
    pub fn new(pi: Array2<f64>, upsilon: Array1<f64>) -> Result<Self> {
        if pi.nrows() != upsilon.len() {
            return Err(Error::DimensionMismatch {
                expected: upsilon.len(),
                found: pi.nrows(),
            });
        }
        for (i, (row, &u)) in pi.rows().into_iter().zip(&upsilon).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!("plan row {i} has a negative entry")));
            }
            if (row.sum() - u).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "plan row {i} sums to {}, expected {u}",
                    row.sum()
                )));
            }
        }
        Ok(TransportPlan { pi, upsilon })
    }

    pub(crate) fn from_parts(pi: Array2<f64>, upsilon: Array1<f64>) -> Self {
        TransportPlan { pi, upsilon }
    }

    pub fn pi(&self) -> ArrayView2<'_, f64> {
        self.pi.view()
    }

    pub fn upsilon(&self) -> ArrayView1<'_, f64> {
        self.upsilon.view()
    }

    pub fn n(&self) -> usize {
        self.pi.nrows()
    }

    pub fn k(&self) -> usize {
        self.pi.ncols()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.pi, self.upsilon)
    }
}

/// Penalty family selected by the user; the effective regularizer also
/// depends on `lambda` (see [`Regularizer::resolve`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyKind {
    #[default]
    Entropic,
    Quadratic,
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::Entropic => "entropic",
            PenaltyKind::Quadratic => "quadratic",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "entropic" => Ok(PenaltyKind::Entropic),
            "quadratic" => Ok(PenaltyKind::Quadratic),
            other => Err(Error::InvalidConfig(format!(
                "unknown regularizer `{other}` (expected entropic or quadratic)"
            ))),
        }
    }
}

/// Row-separable regularizer `lambda * phi(pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `lambda = 0`: hard assignment to the cheapest component.
    None,
    /// `phi(pi) = sum pi (log pi - 1)`, with `0 log 0 = 0`.
    Entropic { lambda: f64 },
    /// `phi(pi) = sum pi^2 / 2`.
    Quadratic { lambda: f64 },
}

impl Regularizer {
    pub fn resolve(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(if lambda < LAMBDA_MIN {
            Regularizer::None
        } else {
            match kind {
                PenaltyKind::Entropic => Regularizer::Entropic { lambda },
                PenaltyKind::Quadratic => Regularizer::Quadratic { lambda },
            }
        })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::Entropic { lambda } | Regularizer::Quadratic { lambda } => lambda,
        }
    }

    pub fn phi(&self, pi: ArrayView2<'_, f64>) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::Entropic { .. } => pi.iter().map(|&p| entropic_term(p)).sum(),
            Regularizer::Quadratic { .. } => 0.5 * pi.iter().map(|p| p * p).sum::<f64>(),
        }
    }

    /// `lambda * phi(pi)`.
    pub fn penalty(&self, pi: ArrayView2<'_, f64>) -> f64 {
        match self {
            Regularizer::None => 0.0,
            _ => self.lambda() * self.phi(pi),
        }
    }

    /// Whether this regularizer can leave a column of the plan empty.
    pub fn can_zero_columns(&self) -> bool {
        !matches!(self, Regularizer::Entropic { .. })
    }

    pub fn solve(&self, gamma: &CostMatrix, upsilon: ArrayView1<'_, f64>) -> TransportPlan {
        solve_rows(self, gamma, upsilon)
    }
}

fn entropic_term(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p.ln() - 1.0)
    }
}

/// Solver for a single row of the plan update.
pub trait RowSolver: Sync {
    /// Writes the optimal row for costs `cost` and row mass `mass` into `out`.
    fn solve_row(&self, cost: ArrayView1<'_, f64>, mass: f64, out: ArrayViewMut1<'_, f64>);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HardRows;

#[derive(Debug, Clone, Copy)]
pub struct EntropicRows {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticRows {
    pub lambda: f64,
}

impl RowSolver for HardRows {
    fn solve_row(&self, cost: ArrayView1<'_, f64>, mass: f64, mut out: ArrayViewMut1<'_, f64>) {
        out.fill(0.0);
        if out.is_empty() {
            return;
        }
        out[argmin_lowest(cost)] = mass;
    }
}

impl RowSolver for EntropicRows {
    fn solve_row(&self, cost: ArrayView1<'_, f64>, mass: f64, mut out: ArrayViewMut1<'_, f64>) {
        if self.lambda < LAMBDA_MIN {
            return HardRows.solve_row(cost, mass, out);
        }
        let max = cost
            .iter()
            .map(|c| -c / self.lambda)
            .fold(f64::NEG_INFINITY, f64::max);
        Zip::from(&mut out)
            .and(&cost)
            .for_each(|o, &c| *o = (-c / self.lambda - max).exp());
        let total = out.sum();
        out.mapv_inplace(|e| mass * (e / total));
    }
}

impl RowSolver for QuadraticRows {
    fn solve_row(&self, cost: ArrayView1<'_, f64>, mass: f64, mut out: ArrayViewMut1<'_, f64>) {
        if self.lambda < LAMBDA_MIN {
            return HardRows.solve_row(cost, mass, out);
        }
        let target: Vec<f64> = cost.iter().map(|c| -c / self.lambda).collect();
        let projected = project_scaled_simplex(&target, mass);
        out.assign(&ArrayView1::from(&projected));
    }
}

impl RowSolver for Regularizer {
    fn solve_row(&self, cost: ArrayView1<'_, f64>, mass: f64, out: ArrayViewMut1<'_, f64>) {
        match *self {
            Regularizer::None => HardRows.solve_row(cost, mass, out),
            Regularizer::Entropic { lambda } => EntropicRows { lambda }.solve_row(cost, mass, out),
            Regularizer::Quadratic { lambda } => QuadraticRows { lambda }.solve_row(cost, mass, out),
        }
    }
}

/// Applies a row solver to every row of the cost matrix.
pub fn solve_rows<S: RowSolver + ?Sized>(
    solver: &S,
    gamma: &CostMatrix,
    upsilon: ArrayView1<'_, f64>,
) -> TransportPlan {
    let mut pi = Array2::zeros(gamma.0.dim());
    let zip = Zip::from(pi.rows_mut()).and(gamma.0.rows()).and(&upsilon);
    if gamma.0.len() >= PARALLEL_MIN_ENTRIES {
        zip.par_for_each(|out, cost, &mass| solver.solve_row(cost, mass, out));
    } else {
        zip.for_each(|out, cost, &mass| solver.solve_row(cost, mass, out));
    }
    TransportPlan::from_parts(pi, upsilon.to_owned())
}

fn argmin_lowest(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &c) in row.iter().enumerate().skip(1) {
        if c < row[best] {
            best = j;
        }
    }
    best
}

/// Euclidean projection of `v` onto `{p >= 0, sum p = mass}` by the sorted
/// threshold rule.
pub fn project_scaled_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = sorted[0] - mass;
    for (r, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - mass) / (r + 1) as f64;
        if u - t > 0.0 {
            threshold = t;
        } else {
            break;
        }
    }
    let mut p: Vec<f64> = v.iter().map(|x| (x - threshold).max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x *= mass / total);
    }
    p
}

/// Log-densities `log p_j(x_i)` (carrier included), observations by components.
pub fn log_likelihoods(model: &MixtureModel, data: &Dataset) -> Result<Array2<f64>> {
    check_compatible(model, data)?;
    let family = model.family();
    let thetas = model.natural_params();
    let psis: Vec<f64> = thetas.iter().map(|t| family.psi(&t.0)).collect();
    let points = data.points();
    let mut out = Array2::zeros((data.len(), model.k()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let x = points.row(i).to_vec();
        let carrier = family.log_carrier(&x);
        for (j, v) in row.iter_mut().enumerate() {
            *v = dot(&x, &thetas[j].0) - psis[j] + carrier;
        }
    }
    Ok(out)
}

pub(crate) fn check_compatible(model: &MixtureModel, data: &Dataset) -> Result<()> {
    if model.family() != data.family() {
        return Err(Error::InvalidConfig(format!(
            "model family {} does not match data family {}",
            model.family(),
            data.family()
        )));
    }
    Ok(())
}

pub(crate) fn cost_entry(weight: f64, log_likelihood: f64) -> f64 {
    -weight.ln() - log_likelihood
}

/// `gamma_ij = -log(omega_j) - log p_j(x_i)`. Every weight must be positive;
/// zero-weight components are pruned before this is called.
pub fn cost_matrix(model: &MixtureModel, data: &Dataset) -> Result<CostMatrix> {
    if let Some(j) = model.weights().iter().position(|&w| w <= 0.0) {
        return Err(Error::DegenerateModel { component: j });
    }
    let mut gamma = log_likelihoods(model, data)?;
    let weights = model.weights();
    for mut row in gamma.rows_mut() {
        Zip::from(&mut row)
            .and(&weights)
            .for_each(|g, &w| *g = cost_entry(w, *g));
    }
    Ok(CostMatrix(gamma))
}

/// Unregularized plan: each row ships its mass to the cheapest component,
/// ties going to the lowest index.
pub fn estep_hard(gamma: &CostMatrix, upsilon: ArrayView1<'_, f64>) -> TransportPlan {
    solve_rows(&HardRows, gamma, upsilon)
}

/// Entropic plan computed from costs in the log domain. Penalties below
/// [`LAMBDA_MIN`] fall back to the hard plan.
pub fn estep_entropic_cost(gamma: &CostMatrix, upsilon: ArrayView1<'_, f64>, lambda: f64) -> TransportPlan {
    solve_rows(&EntropicRows { lambda }, gamma, upsilon)
}

/// Entropic plan `pi_ij ∝ upsilon_i (omega_j p_j(x_i))^(1/lambda)` for a model.
pub fn estep_entropic(model: &MixtureModel, data: &Dataset, lambda: f64) -> Result<TransportPlan> {
    let gamma = cost_matrix(model, data)?;
    Ok(estep_entropic_cost(&gamma, data.upsilon(), lambda))
}

/// Quadratic-penalty plan. `lambda = 0` is rejected; use [`estep_hard`].
pub fn estep_quadratic(
    gamma: &CostMatrix,
    upsilon: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<TransportPlan> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "quadratic penalty needs a positive lambda, got {lambda}"
        )));
    }
    Ok(solve_rows(&QuadraticRows { lambda }, gamma, upsilon))
}

/// Entropic potential `sum p (log p - 1)` on strictly positive vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct EntropicPotential;

/// Quadratic potential `sum p^2 / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticPotential;

impl ConvexFunction for EntropicPotential {
    fn label(&self) -> String {
        "entropic potential".into()
    }

    fn contains(&self, point: &[f64]) -> bool {
        point.iter().all(|&p| p > 0.0 && p.is_finite())
    }

    fn value(&self, point: &[f64]) -> f64 {
        point.iter().map(|&p| entropic_term(p)).sum()
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        point.iter().map(|p| p.ln()).collect()
    }
}

impl ConvexFunction for QuadraticPotential {
    fn label(&self) -> String {
        "quadratic potential".into()
    }

    fn contains(&self, point: &[f64]) -> bool {
        point.iter().all(|p| p.is_finite())
    }

    fn value(&self, point: &[f64]) -> f64 {
        0.5 * point.iter().map(|p| p * p).sum::<f64>()
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        point.to_vec()
    }
}

/// `B_phi(pi_star || tilde_pi)` over the whole matrix. The plan update is the
/// Bregman projection of `tilde_pi = grad phi*(-gamma / lambda)` onto the
/// row-constrained plans, so `pi_star` should minimize this value.
pub fn bregman_projection_check<F: ConvexFunction + ?Sized>(
    pi_star: &TransportPlan,
    tilde_pi: ArrayView2<'_, f64>,
    phi: &F,
) -> Result<f64> {
    if pi_star.pi.dim() != tilde_pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi_star.pi.len(),
            found: tilde_pi.len(),
        });
    }
    let a: Vec<f64> = pi_star.pi.iter().copied().collect();
    let b: Vec<f64> = tilde_pi.iter().copied().collect();
    crate::family::bregman_div(phi, &a, &b)
}

/// Shannon entropy of each row of the plan after normalizing it by its mass;
/// lies in `[0, log k]`.
pub fn plan_entropy(plan: &TransportPlan) -> Array1<f64> {
    let max = (plan.k() as f64).ln();
    plan.pi
        .rows()
        .into_iter()
        .zip(&plan.upsilon)
        .map(|(row, &mass)| {
            let h: f64 = row
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| {
                    let q = p / mass;
                    -q * q.ln()
                })
                .sum();
            h.clamp(0.0, max)
        })
        .collect()
}

/// Row entropies averaged with the empirical weights.
pub fn mean_row_entropy(plan: &TransportPlan) -> f64 {
    plan_entropy(plan).dot(&plan.upsilon)
}
