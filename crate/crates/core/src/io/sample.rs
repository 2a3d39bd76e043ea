use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::{Bernoulli, Exp, Normal, Poisson};

use crate::error::Result;
use crate::family::Family;
use crate::init::rng_from_seed;
use crate::model::{Dataset, MixtureModel};

/// Draws from a mixture together with the component each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub family: Family,
    pub points: Array2<f64>,
    /// Zero-based component indices.
    pub labels: Vec<usize>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The draws with uniform empirical weights, labels dropped.
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::uniform(self.family, self.points.clone())
    }
}

/// `n` i.i.d. draws: a component `j ~ omega`, then `x ~ p_j`.
pub fn sample_mixture(model: &MixtureModel, n: usize, seed: u64) -> Sample {
    let family = model.family();
    let mut rng = rng_from_seed(seed);
    let chooser = WeightedIndex::new(model.weights().iter().copied()).expect("mixture weights lie on the simplex");
    let means = model.means();
    let mut points = Array2::zeros((n, family.dim()));
    let mut labels = Vec::with_capacity(n);
    for mut row in points.rows_mut() {
        let j = chooser.sample(&mut rng);
        let xi = means.row(j);
        match family {
            Family::GaussianSpherical { .. } => {
                for (x, &m) in row.iter_mut().zip(xi) {
                    *x = Normal::new(m, 1.0).expect("finite mean").sample(&mut rng);
                }
            }
            Family::Poisson => {
                row[0] = Poisson::new(xi[0]).expect("positive rate").sample(&mut rng);
            }
            Family::Bernoulli => {
                row[0] = f64::from(u8::from(Bernoulli::new(xi[0]).expect("probability").sample(&mut rng)));
            }
            Family::Exponential => {
                row[0] = Exp::new(1.0 / xi[0]).expect("positive rate").sample(&mut rng);
            }
        }
        labels.push(j);
    }
    Sample { family, points, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weight_components_are_never_drawn() {
        let model = MixtureModel::new(Family::gaussian(1), array![1.0, 0.0], array![[0.0], [5.0]]).unwrap();
        let s = sample_mixture(&model, 500, 1);
        assert!(s.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn label_frequencies_within_three_sigma() {
        let model = MixtureModel::new(Family::gaussian(1), array![0.3, 0.7], array![[-5.0], [5.0]]).unwrap();
        let n = 10_000;
        let s = sample_mixture(&model, n, 2);
        let ones = s.labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((ones - 0.7).abs() <= 3.0 * sigma, "{ones}");
        // with means this far apart the label is recoverable from the sign
        for (x, &l) in s.points.column(0).iter().zip(&s.labels) {
            assert_eq!(l == 1, *x > 0.0);
        }
    }

    #[test]
    fn poisson_sample_mean_within_clt_bound() {
        let model = MixtureModel::uniform(Family::Poisson, array![[4.0]]).unwrap();
        let n = 10_000;
        let s = sample_mixture(&model, n, 3);
        let mean = s.points.sum() / n as f64;
        assert!((mean - 4.0).abs() <= 3.0 * (4.0 / n as f64).sqrt(), "{mean}");
        assert!(s.points.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        assert!(s.dataset().is_ok());
    }

    #[test]
    fn every_family_draws_in_domain() {
        for (family, mean) in [(Family::Bernoulli, 0.3), (Family::Exponential, 2.0), (Family::Poisson, 0.5)] {
            let model = MixtureModel::uniform(family, array![[mean]]).unwrap();
            let s = sample_mixture(&model, 2000, 4);
            assert!(s.dataset().is_ok());
            let avg = s.points.sum() / 2000.0;
            assert!((avg - mean).abs() < 0.15 * mean.max(1.0), "{family}: {avg}");
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let model = MixtureModel::uniform(Family::gaussian(2), array![[0.0, 0.0], [3.0, 1.0]]).unwrap();
        assert_eq!(sample_mixture(&model, 50, 9), sample_mixture(&model, 50, 9));
        assert_ne!(sample_mixture(&model, 50, 9), sample_mixture(&model, 50, 10));
        let empty = sample_mixture(&model, 0, 9);
        assert!(empty.is_empty() && empty.points.dim() == (0, 2));
    }
}
