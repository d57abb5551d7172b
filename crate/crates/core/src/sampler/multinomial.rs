use rayon::prelude::*;

use super::cells::CellSampleSet;
use crate::error::{Error, Result};
use crate::rng::counter_uniform;

/// Inverse-CDF sampler over the positive entries of a weight array.
#[derive(Clone, Debug)]
pub(crate) struct Categorical {
    cells: Vec<usize>,
    cdf: Vec<f64>,
}

impl Categorical {
    pub(crate) fn new(weights: &[f64]) -> Result<Self> {
        let mut cells = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 && w.is_finite() {
                acc += w;
                cells.push(i);
                cdf.push(acc);
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyDensityField);
        }
        Ok(Self { cells, cdf })
    }

    fn total(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    /// Draw number `counter` of stream `key`.
    pub(crate) fn draw(&self, key: u64, counter: u64) -> usize {
        let x = counter_uniform(key, counter) * self.total();
        let pos = self.cdf.partition_point(|&c| c <= x);
        self.cells[pos.min(self.cells.len() - 1)]
    }

    /// The first `trials` draws of stream `key`, in draw order.
    pub(crate) fn draws(&self, key: u64, trials: usize) -> Vec<usize> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| self.draw(key, t))
            .collect()
    }
}

/// `trials` independent draws from the categorical distribution
/// `weights / Σ weights`, aggregated into multiplicities.
pub fn multinomial_sample(weights: &[f64], trials: usize, seed: u64) -> Result<CellSampleSet> {
    let dist = Categorical::new(weights)?;
    Ok(CellSampleSet::from_draws(dist.draws(seed, trials)))
}

/// Expected number of distinct cells hit by `trials` draws:
/// `Σ 1 - (1 - p_c)^trials` with `p = weights / Σ weights`.
pub fn expected_distinct(weights: &[f64], trials: usize) -> f64 {
    let sum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if !(sum > 0.0) {
        return 0.0;
    }
    let t = trials as f64;
    weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| -(t * (-(w / sum)).ln_1p()).exp_m1())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_weights() {
        let s = multinomial_sample(&[1.0, 0.0], 5, 3).unwrap();
        assert_eq!(s.entries(), &[(0, 5)]);
    }

    #[test]
    fn all_zero_is_error() {
        assert!(matches!(
            multinomial_sample(&[0.0, 0.0, 0.0], 5, 1),
            Err(Error::EmptyDensityField)
        ));
    }

    #[test]
    fn total_equals_trials_and_is_seeded() {
        let w = [0.1, 0.0, 0.4, 0.25, 0.25];
        let a = multinomial_sample(&w, 1000, 9).unwrap();
        assert_eq!(a.total(), 1000);
        assert_eq!(a, multinomial_sample(&w, 1000, 9).unwrap());
        assert_ne!(a, multinomial_sample(&w, 1000, 10).unwrap());
        assert_eq!(a.multiplicity(1), 0);
    }

    #[test]
    fn unnormalized_weights_are_normalized() {
        let a = multinomial_sample(&[2.0, 6.0], 40_000, 5).unwrap();
        let f = a.multiplicity(1) as f64 / 40_000.0;
        assert!((f - 0.75).abs() < 0.01);
    }

    #[test]
    fn two_cell_two_trial_distribution() {
        // P((1,1)) = 2!/(1!1!) * 0.5 * 0.5 = 0.5
        let trials = 20_000;
        let split = (0..trials)
            .filter(|&s| multinomial_sample(&[0.5, 0.5], 2, s).unwrap().len() == 2)
            .count();
        let p = split as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.015, "p = {p}");
    }

    #[test]
    fn expected_distinct_limits() {
        assert!((expected_distinct(&[1.0, 0.0], 10) - 1.0).abs() < 1e-12);
        // Two equal cells, two draws: 2 * (1 - 0.25) = 1.5
        assert!((expected_distinct(&[1.0, 1.0], 2) - 1.5).abs() < 1e-12);
        assert_eq!(expected_distinct(&[0.0, 0.0], 10), 0.0);
    }
}
