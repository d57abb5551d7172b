//! Density-guided grid resampling.
//!
//! Candidate cells are drawn by multinomial sampling from the effective
//! density, then reduced with density-guided farthest point sampling, and
//! finally assigned point counts. Baseline samplers share the same interface.

mod cells;
mod dfps;
mod multinomial;

use std::fmt;
use std::str::FromStr;

pub use cells::{allocate_points, CellSampleSet};
pub use dfps::{density_guided_fps, dfps_cells, fps_cells, vanilla_fps};
pub use multinomial::{expected_distinct, multinomial_sample};

use crate::error::{Error, Result};
use crate::rng::stream_key;
use crate::voxel::DensityField;
use multinomial::Categorical;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Density scaled by occupancy probability, `δ · sigmoid(p)`.
pub fn effective_density(field: &DensityField) -> Vec<f64> {
    field
        .density()
        .iter()
        .zip(field.occupancy_logit())
        .map(|(d, l)| d * sigmoid(*l))
        .collect()
}

/// Deterministic baseline: cells with occupancy probability above one half,
/// ranked by density, the top `count` of them receiving points in proportion
/// to density.
pub fn threshold_topk_sample(field: &DensityField, count: usize) -> Result<CellSampleSet> {
    let density = field.density();
    let mut passing: Vec<usize> = field
        .occupancy_logit()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 0.0)
        .map(|(i, _)| i)
        .collect();
    if passing.is_empty() {
        return Err(Error::NoOccupiedCells);
    }
    passing.sort_by(|&a, &b| density[b].total_cmp(&density[a]).then(a.cmp(&b)));
    passing.truncate(count.max(1));
    allocate_points(&passing, density, count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerMethod {
    ThresholdTopk,
    Multinomial,
    MultinomialFps,
    MultinomialDfps,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 4] = [
        SamplerMethod::ThresholdTopk,
        SamplerMethod::Multinomial,
        SamplerMethod::MultinomialFps,
        SamplerMethod::MultinomialDfps,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerMethod::ThresholdTopk => "topk",
            SamplerMethod::Multinomial => "multinomial",
            SamplerMethod::MultinomialFps => "mfps",
            SamplerMethod::MultinomialDfps => "mdfps",
        }
    }
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown sampler `{s}` (expected topk, multinomial, mfps or mdfps)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Target upsampling rate `r`.
    pub upsample_rate: f64,
    /// Candidate oversampling factor; `⌈multiplier · r · N⌉` multinomial trials.
    pub resample_multiplier: f64,
    pub seed: u64,
    pub method: SamplerMethod,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            upsample_rate: 4.0,
            resample_multiplier: 4.0,
            seed: 0,
            method: SamplerMethod::MultinomialDfps,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.upsample_rate > 0.0) || !self.upsample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "upsample rate must be positive, got {}",
                self.upsample_rate
            )));
        }
        if !(self.resample_multiplier >= 1.0) || !self.resample_multiplier.is_finite() {
            return Err(Error::invalid(format!(
                "resample multiplier must be at least 1, got {}",
                self.resample_multiplier
            )));
        }
        Ok(())
    }

    /// Output point count `⌈r · N⌋` (rounded, at least 1).
    pub fn target_count(&self, n_input: usize) -> usize {
        target_count(self.upsample_rate, n_input)
    }

    pub fn candidate_trials(&self, n_input: usize) -> usize {
        ((self.resample_multiplier * self.upsample_rate * n_input as f64).ceil() as usize)
            .max(self.target_count(n_input))
    }
}

pub fn target_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64).round() as usize).max(1)
}

/// Number of distinct cells the reducing FPS stage keeps: the expected number
/// of distinct cells a plain multinomial draw of `target` trials would occupy.
pub fn cell_budget(weights: &[f64], target: usize) -> usize {
    (expected_distinct(weights, target).round() as usize).clamp(1, target.max(1))
}

/// Samples cells from a density field for an input of `n_input` points.
///
/// The returned set always totals `⌈r · N⌋`. The `Multinomial` method keeps the
/// first `⌈r · N⌋` draws of the candidate stream, i.e. a plain multinomial
/// sample at the target size.
pub fn sample_cells(
    field: &DensityField,
    config: &SamplerConfig,
    n_input: usize,
) -> Result<CellSampleSet> {
    config.validate()?;
    if n_input == 0 {
        return Err(Error::invalid("input point count must be positive"));
    }
    let target = config.target_count(n_input);
    if config.method == SamplerMethod::ThresholdTopk {
        return threshold_topk_sample(field, target);
    }

    let weights = effective_density(field);
    let dist = Categorical::new(&weights)?;
    let key = stream_key(config.seed, "multinomial", 0);
    if config.method == SamplerMethod::Multinomial {
        return Ok(CellSampleSet::from_draws(dist.draws(key, target)));
    }

    let candidates = CellSampleSet::from_draws(dist.draws(key, config.candidate_trials(n_input)));
    let m = candidates.len().min(cell_budget(&weights, target));
    let grid = field.grid();
    let selected = match config.method {
        SamplerMethod::MultinomialDfps => dfps_cells(&candidates, &weights, &grid, m)?,
        _ => fps_cells(&candidates, &grid, m)?,
    };
    allocate_points(&selected, &weights, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{Provenance, VoxelGrid};

    fn field_from(density: Vec<f64>, logits: Vec<f64>, r: usize) -> DensityField {
        DensityField::new(VoxelGrid::new(r).unwrap(), density, logits, Provenance::ExternalFile)
            .unwrap()
    }

    #[test]
    fn effective_density_examples() {
        let mut d = vec![0.0; 8];
        let mut l = vec![0.0; 8];
        d[0] = 0.4;
        l[1] = 10.0;
        d[2] = 1.0;
        l[2] = 10.0;
        let e = effective_density(&field_from(d.clone(), l, 2));
        assert!((e[0] - 0.2).abs() < 1e-15);
        assert_eq!(e[1], 0.0);
        assert!((e[2] - 0.999_954_602_131_297_6).abs() < 1e-15);
        assert!(e.iter().zip(&d).all(|(e, d)| e <= d));
    }

    #[test]
    fn topk_examples() {
        let mut d = vec![0.0; 8];
        let mut l = vec![-10.0; 8];
        d[3] = 0.75;
        d[5] = 0.25;
        l[3] = 10.0;
        l[5] = 10.0;
        // Dense but below threshold: never selected.
        d[6] = 0.9;
        let f = field_from(d.clone(), l.clone(), 2);
        let s = threshold_topk_sample(&f, 4).unwrap();
        assert_eq!(s.entries(), &[(3, 3), (5, 1)]);

        l[5] = -1.0;
        let s = threshold_topk_sample(&field_from(d, l, 2), 9).unwrap();
        assert_eq!(s.entries(), &[(3, 9)]);

        let empty = field_from(vec![0.1; 8], vec![-1.0; 8], 2);
        assert!(matches!(threshold_topk_sample(&empty, 3), Err(Error::NoOccupiedCells)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in SamplerMethod::ALL {
            assert_eq!(m.name().parse::<SamplerMethod>().unwrap(), m);
        }
        assert!("fps".parse::<SamplerMethod>().is_err());
    }

    #[test]
    fn config_validation() {
        let bad = SamplerConfig {
            resample_multiplier: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            upsample_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn blob_field() -> DensityField {
        let grid = VoxelGrid::new(8).unwrap();
        let mut d = vec![0.0; grid.cell_count()];
        for i in 1..7 {
            for j in 1..7 {
                d[grid.index(i, j, 4)] = 1.0 + ((i * 7 + j) % 5) as f64;
            }
        }
        let sum: f64 = d.iter().sum();
        d.iter_mut().for_each(|x| *x /= sum);
        let l = d.iter().map(|x| if *x > 0.0 { 10.0 } else { -10.0 }).collect();
        field_from(d, l, 8)
    }

    #[test]
    fn output_total_is_exact_for_any_rate() {
        let f = blob_field();
        for method in SamplerMethod::ALL {
            for r in [2.0, 3.5, 7.0] {
                let cfg = SamplerConfig {
                    upsample_rate: r,
                    method,
                    ..Default::default()
                };
                let s = sample_cells(&f, &cfg, 256).unwrap();
                assert_eq!(s.total(), (r * 256.0).round() as usize, "{method} r={r}");
            }
        }
    }

    #[test]
    fn multinomial_passthrough() {
        let f = blob_field();
        let cfg = SamplerConfig {
            upsample_rate: 2.0,
            resample_multiplier: 1.0,
            seed: 11,
            method: SamplerMethod::Multinomial,
        };
        let s = sample_cells(&f, &cfg, 50).unwrap();
        let key = stream_key(11, "multinomial", 0);
        let direct = multinomial_sample(&effective_density(&f), 100, key).unwrap();
        assert_eq!(s, direct);
    }

    #[test]
    fn sampling_is_deterministic_across_thread_counts() {
        let f = blob_field();
        let cfg = SamplerConfig::default();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_cells(&f, &cfg, 300).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
