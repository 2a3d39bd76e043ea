use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::family::{Family, NaturalParameter};

/// Tolerance on simplex sums for weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Observations `x_i` (rows) with empirical weights `upsilon` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    family: Family,
    points: Array2<f64>,
    upsilon: Array1<f64>,
}

impl Dataset {
    /// Validates every row against the family and requires `upsilon` to be a
    /// strictly positive probability vector.
    pub fn new(family: Family, points: Array2<f64>, upsilon: Array1<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::InvalidDataset("no observations".into()));
        }
        if d != family.dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: d,
            });
        }
        if upsilon.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} weights for {n} observations",
                upsilon.len()
            )));
        }
        for (i, row) in points.rows().into_iter().enumerate() {
            let row = row.to_vec();
            if !family.data_domain(&row) {
                return Err(Error::InvalidDataset(format!(
                    "observation {i} = {row:?} is outside the {} data domain",
                    family.name()
                )));
            }
        }
        if let Some(i) = upsilon.iter().position(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(Error::InvalidDataset(format!(
                "weight {i} = {} is not positive",
                upsilon[i]
            )));
        }
        let total: f64 = upsilon.sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDataset(format!("weights sum to {total}, not 1")));
        }
        Ok(Dataset {
            family,
            points,
            upsilon,
        })
    }

    /// Uniform empirical weights `1/n`.
    pub fn uniform(family: Family, points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        let upsilon = Array1::from_elem(n, 1.0 / n.max(1) as f64);
        Dataset::new(family, points, upsilon)
    }

    /// Positive raw weights, normalized to sum to one.
    pub fn weighted(family: Family, points: Array2<f64>, weights: &[f64]) -> Result<Self> {
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDataset(format!(
                "weight {i} = {} is not positive",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        let upsilon = weights.iter().map(|w| w / total).collect();
        Dataset::new(family, points, upsilon)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn upsilon(&self) -> ArrayView1<'_, f64> {
        self.upsilon.view()
    }

    /// Number of pairwise distinct observations.
    pub fn distinct_count(&self) -> usize {
        self.distinct_rows().len()
    }

    /// Indices of the first occurrence of each distinct row, in row order.
    pub(crate) fn distinct_rows(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::new();
        self.points
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, row)| seen.insert(row_key(&row.to_vec())))
            .map(|(i, _)| i)
            .collect()
    }
}

pub(crate) fn row_key(row: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same observation
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Mixture weights on the simplex and per-component expectation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: Family,
    weights: Array1<f64>,
    means: Array2<f64>,
}

impl MixtureModel {
    /// Builds a model; expectation parameters are clamped into the interior of
    /// the family's expectation domain.
    pub fn new(family: Family, weights: Array1<f64>, means: Array2<f64>) -> Result<Self> {
        let (k, d) = means.dim();
        if k == 0 {
            return Err(Error::InvalidConfig("a mixture needs at least one component".into()));
        }
        if d != family.dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: d,
            });
        }
        if weights.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: weights.len(),
            });
        }
        if let Some(j) = weights.iter().position(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "weight {j} = {} is negative or not finite",
                weights[j]
            )));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidConfig(format!("weights sum to {total}, not 1")));
        }
        let mut clamped = means;
        for mut row in clamped.rows_mut() {
            let c = family.clamp_expectation(&row.to_vec())?;
            row.assign(&ArrayView1::from(&c.value.0));
        }
        Ok(MixtureModel {
            family,
            weights,
            means: clamped,
        })
    }

    /// Uniform weights `1/k`.
    pub fn uniform(family: Family, means: Array2<f64>) -> Result<Self> {
        let k = means.nrows();
        MixtureModel::new(family, Array1::from_elem(k, 1.0 / k.max(1) as f64), means)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn k(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    /// Expectation parameters, one component per row.
    pub fn means(&self) -> ArrayView2<'_, f64> {
        self.means.view()
    }

    pub fn natural_params(&self) -> Vec<NaturalParameter> {
        self.means
            .rows()
            .into_iter()
            .map(|row| NaturalParameter(self.family.grad_psi_inv(&row.to_vec())))
            .collect()
    }
}
