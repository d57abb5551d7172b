use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::chamfer;
use crate::pointcloud::{Point, PointCloud};
use crate::rng::{seeded_rng, stream_key};
use crate::sampler::{sample_cells, CellSampleSet, SamplerConfig, SamplerMethod};
use crate::voxel::{density_ground_truth, DensityField, Provenance, VoxelGrid, GROUND_TRUTH_LOGIT};

/// How well a set of sampled cells matches the true surface. Sampled cells
/// count as correct for their whole 26-neighborhood.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDiagnostics {
    pub method: SamplerMethod,
    pub multiplier: f64,
    /// Fraction of true points lying in a sampled cell or a neighbor of one.
    pub precision: f64,
    /// Fraction of truly occupied cells with no sampled cell in their
    /// neighborhood.
    pub missing_rate: f64,
    /// Chamfer distance between distinct sampled cell centers and true points.
    pub cell_cd: f64,
}

/// Scores `samples` against a ground-truth field built from `truth_points`.
pub fn diagnose_cells(
    samples: &CellSampleSet,
    grid: &VoxelGrid,
    truth: &DensityField,
    truth_points: &PointCloud,
) -> Result<(f64, f64, f64)> {
    if truth.grid() != *grid {
        return Err(Error::ResolutionMismatch {
            left: grid.resolution(),
            right: truth.grid().resolution(),
        });
    }
    if samples.is_empty() {
        return Err(Error::invalid("no sampled cells"));
    }
    let mut hit = vec![false; grid.cell_count()];
    for c in samples.cells() {
        hit[c] = true;
        for n in grid.neighbors26(c) {
            hit[n] = true;
        }
    }
    let precision: f64 = truth
        .density()
        .iter()
        .zip(&hit)
        .filter(|(_, h)| **h)
        .map(|(d, _)| d)
        .sum();
    let occupied: Vec<usize> = truth.occupied_cells().collect();
    if occupied.is_empty() {
        return Err(Error::NoOccupiedCells);
    }
    let missed = occupied.iter().filter(|&&c| !hit[c]).count();
    let centers = PointCloud::new(samples.cells().map(|c| grid.cell_center(c)).collect())?;
    let cell_cd = chamfer(&centers, truth_points)?;
    Ok((precision.min(1.0), missed as f64 / occupied.len() as f64, cell_cd))
}

/// Diagnostics for each method at each multiplier. `n_input` and the rate in
/// `base` set the number of points to place.
pub fn sampling_diagnostics(
    field: &DensityField,
    truth_points: &PointCloud,
    n_input: usize,
    base: &SamplerConfig,
    methods: &[SamplerMethod],
    multipliers: &[f64],
) -> Result<Vec<SamplingDiagnostics>> {
    let grid = field.grid();
    truth_points.require_normalized()?;
    let truth = density_ground_truth(truth_points, &grid)?;
    let mut out = Vec::with_capacity(methods.len() * multipliers.len());
    for &method in methods {
        for &multiplier in multipliers {
            let cfg = SamplerConfig {
                resample_multiplier: multiplier,
                method,
                ..base.clone()
            };
            let samples = sample_cells(field, &cfg, n_input)?;
            let (precision, missing_rate, cell_cd) =
                diagnose_cells(&samples, &grid, &truth, truth_points)?;
            out.push(SamplingDiagnostics {
                method,
                multiplier,
                precision,
                missing_rate,
                cell_cd,
            });
        }
    }
    Ok(out)
}

/// A synthetic field with a known surface: a full layer of cells through the
/// middle of the grid plus a few far, faint outlier cells.
#[derive(Clone, Debug)]
pub struct PlantedBenchmark {
    pub field: DensityField,
    /// Points sampled uniformly on the true plane.
    pub truth_points: PointCloud,
    pub plane_cells: Vec<usize>,
    pub outlier_cells: Vec<usize>,
    /// Input size the sampler is asked to upsample.
    pub n_input: usize,
    pub rate: f64,
}

impl PlantedBenchmark {
    pub const RESOLUTION: usize = 32;
    pub const OUTLIER_WEIGHT: f64 = 1e-4;
    pub const TRUTH_POINTS: usize = 4096;
    /// Layers of the outliers, eight cells above and below the plane.
    const OUTLIER_LAYERS: [usize; 2] = [8, 24];
    const PLANE_LAYER: usize = 16;

    pub fn sampler_config(&self, method: SamplerMethod, multiplier: f64, seed: u64) -> SamplerConfig {
        SamplerConfig {
            upsample_rate: self.rate,
            resample_multiplier: multiplier,
            seed,
            method,
        }
    }

    pub fn diagnostics(
        &self,
        method: SamplerMethod,
        multiplier: f64,
        seed: u64,
    ) -> Result<SamplingDiagnostics> {
        let cfg = self.sampler_config(method, multiplier, seed);
        Ok(sampling_diagnostics(&self.field, &self.truth_points, self.n_input, &cfg, &[method], &[multiplier])?
            .remove(0))
    }
}

/// Builds the planted benchmark: plane cells with weight `1/|plane|` and
/// `1%` as many outlier cells with weight `1e-4`, all with confident
/// occupancy; every other cell is empty. The true points depend on `seed`.
pub fn planted_benchmark(seed: u64) -> Result<PlantedBenchmark> {
    let r = PlantedBenchmark::RESOLUTION;
    let grid = VoxelGrid::new(r)?;
    let plane_cells: Vec<usize> = (0..r)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .map(|(i, j)| grid.index(i, j, PlantedBenchmark::PLANE_LAYER))
        .collect();
    let outlier_count = (plane_cells.len() as f64 * 0.01).round() as usize;
    let outlier_cells: Vec<usize> = (0..outlier_count)
        .map(|t| {
            let layer = PlantedBenchmark::OUTLIER_LAYERS[t % 2];
            grid.index((7 * t + 3) % r, (13 * t + 5) % r, layer)
        })
        .collect();

    let mut density = vec![0.0; grid.cell_count()];
    let mut logits = vec![-GROUND_TRUTH_LOGIT; grid.cell_count()];
    for &c in &plane_cells {
        density[c] = 1.0 / plane_cells.len() as f64;
        logits[c] = GROUND_TRUTH_LOGIT;
    }
    for &c in &outlier_cells {
        density[c] = PlantedBenchmark::OUTLIER_WEIGHT;
        logits[c] = GROUND_TRUTH_LOGIT;
    }
    let field = DensityField::new(grid, density, logits, Provenance::GroundTruth)?;

    let z = grid.cell_center(plane_cells[0]).z;
    let mut rng = seeded_rng(stream_key(seed, "planted", 0));
    let truth = (0..PlantedBenchmark::TRUTH_POINTS)
        .map(|_| Point::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, z))
        .collect();
    Ok(PlantedBenchmark {
        field,
        truth_points: PointCloud::new(truth)?,
        plane_cells,
        outlier_cells,
        n_input: 75,
        rate: 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_setup() -> (VoxelGrid, PointCloud, DensityField) {
        let grid = VoxelGrid::new(8).unwrap();
        let pts = PointCloud::new(vec![grid.cell_center(grid.index(1, 1, 1)), grid.cell_center(grid.index(1, 2, 1))]).unwrap();
        let truth = density_ground_truth(&pts, &grid).unwrap();
        (grid, pts, truth)
    }

    #[test]
    fn exact_match_is_perfect() {
        let (grid, pts, truth) = truth_setup();
        let samples = CellSampleSet::new(truth.occupied_cells().map(|c| (c, 1)).collect()).unwrap();
        let (p, m, cd) = diagnose_cells(&samples, &grid, &truth, &pts).unwrap();
        assert_eq!((p, m, cd), (1.0, 0.0, 0.0));
    }

    #[test]
    fn disjoint_cells_score_zero() {
        let (grid, pts, truth) = truth_setup();
        let samples = CellSampleSet::new(vec![(grid.index(6, 6, 6), 3)]).unwrap();
        let (p, m, _) = diagnose_cells(&samples, &grid, &truth, &pts).unwrap();
        assert_eq!((p, m), (0.0, 1.0));
    }

    #[test]
    fn resolution_mismatch() {
        let (_, pts, truth) = truth_setup();
        let other = VoxelGrid::new(4).unwrap();
        let samples = CellSampleSet::new(vec![(0, 1)]).unwrap();
        assert!(matches!(
            diagnose_cells(&samples, &other, &truth, &pts),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn planted_layout() {
        let b = planted_benchmark(0).unwrap();
        assert_eq!(b.plane_cells.len(), 1024);
        assert_eq!(b.outlier_cells.len(), 10);
        let mut o = b.outlier_cells.clone();
        o.sort();
        o.dedup();
        assert_eq!(o.len(), 10);
        assert!(b.truth_points.is_normalized(0.0));
    }

    #[test]
    fn dfps_misses_less_than_multinomial() {
        let b = planted_benchmark(1).unwrap();
        let mut dfps = 0.0;
        let mut multi = 0.0;
        for seed in 0..5 {
            dfps += b.diagnostics(SamplerMethod::MultinomialDfps, 4.0, seed).unwrap().missing_rate;
            multi += b.diagnostics(SamplerMethod::Multinomial, 4.0, seed).unwrap().missing_rate;
        }
        assert!(dfps < multi, "{dfps} vs {multi}");
    }
}
