//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use rotmix::{sample_mixture, Dataset, Family, MixtureModel};

/// `k` unit-variance Gaussian components in `dim` dimensions with means on a
/// scaled diagonal, and `n` draws from them.
pub fn gaussian_fixture(n: usize, k: usize, dim: usize, seed: u64) -> (MixtureModel, Dataset) {
    let means = Array2::from_shape_fn((k, dim), |(j, c)| 4.0 * j as f64 + 0.5 * c as f64);
    let model = MixtureModel::uniform(Family::gaussian(dim), means).expect("valid fixture model");
    let data = sample_mixture(&model, n, seed).dataset().expect("nonempty sample");
    (model, data)
}

/// Poisson counts from `k` components with rates spread over `[1, 4k]`.
pub fn poisson_fixture(n: usize, k: usize, seed: u64) -> (MixtureModel, Dataset) {
    let means = Array2::from_shape_fn((k, 1), |(j, _)| 1.0 + 4.0 * j as f64);
    let model = MixtureModel::uniform(Family::Poisson, means).expect("valid fixture model");
    let data = sample_mixture(&model, n, seed).dataset().expect("nonempty sample");
    (model, data)
}
