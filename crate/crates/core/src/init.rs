//! Initial mixture models drawn from the data.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{row_key, Dataset, MixtureModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMethod {
    /// Greedy seeding with probabilities proportional to the divergence to
    /// the nearest chosen center.
    #[default]
    KMeansPlusPlus,
    /// `k` distinct observations drawn uniformly without replacement.
    RandomPoints,
}

impl InitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InitMethod::KMeansPlusPlus => "kmeanspp",
            InitMethod::RandomPoints => "random",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "kmeanspp" => Ok(InitMethod::KMeansPlusPlus),
            "random" | "random_points" => Ok(InitMethod::RandomPoints),
            other => Err(Error::InvalidConfig(format!(
                "unknown init `{other}` (expected kmeanspp or random)"
            ))),
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn initialize(data: &Dataset, k: usize, method: InitMethod, seed: u64) -> Result<MixtureModel> {
    match method {
        InitMethod::KMeansPlusPlus => init_kmeanspp(data, k, seed),
        InitMethod::RandomPoints => init_random_points(data, k, seed),
    }
}

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let distinct = data.distinct_count();
    if k > distinct {
        return Err(Error::Seeding {
            requested: k,
            distinct,
        });
    }
    Ok(())
}

/// Seeds centers in the manner of k-means++, with the squared Euclidean
/// distance replaced by the family's divergence in expectation coordinates.
/// Weights start uniform.
pub fn init_kmeanspp(data: &Dataset, k: usize, seed: u64) -> Result<MixtureModel> {
    check_k(data, k)?;
    let mut rng = rng_from_seed(seed);
    let centers = kmeanspp_indices(data, k, &mut rng)?;
    model_from_rows(data, &centers)
}

/// Indices of the seeded observations, in selection order.
pub fn kmeanspp_indices<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let family = data.family();
    let points = data.points();
    let n = data.len();
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();

    let mut chosen = vec![rng.random_range(0..n)];
    let mut chosen_keys = vec![row_key(&rows[chosen[0]])];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = &rows[*chosen.last().expect("at least one center")];
        let center = family.clamp_expectation(last)?.value.0;
        for (i, row) in rows.iter().enumerate() {
            let d = family.dual_div_unchecked(row, &center).max(0.0);
            nearest[i] = nearest[i].min(d);
        }
        // clamped centers sit a hair away from their own point
        let weights: Vec<f64> = rows
            .iter()
            .zip(&nearest)
            .map(|(row, &d)| if chosen_keys.contains(&row_key(row)) { 0.0 } else { d })
            .collect();
        let sampler = WeightedIndex::new(&weights).map_err(|_| Error::Seeding {
            requested: k,
            distinct: chosen.len(),
        })?;
        let next = sampler.sample(rng);
        chosen_keys.push(row_key(&rows[next]));
        chosen.push(next);
    }
    Ok(chosen)
}

pub fn init_random_points(data: &Dataset, k: usize, seed: u64) -> Result<MixtureModel> {
    check_k(data, k)?;
    let mut rng = rng_from_seed(seed);
    let distinct = data.distinct_rows();
    let picks: Vec<usize> = rand::seq::index::sample(&mut rng, distinct.len(), k)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    model_from_rows(data, &picks)
}

fn model_from_rows(data: &Dataset, indices: &[usize]) -> Result<MixtureModel> {
    let d = data.dim();
    let mut means = Array2::zeros((indices.len(), d));
    for (mut row, &i) in means.rows_mut().into_iter().zip(indices) {
        row.assign(&data.points().row(i));
    }
    MixtureModel::uniform(data.family(), means)
}
