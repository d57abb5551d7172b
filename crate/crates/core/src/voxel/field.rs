use super::grid::VoxelGrid;
use crate::error::{Error, Result};

/// Magnitude of the hard occupancy labels used for ground-truth fields.
pub const GROUND_TRUTH_LOGIT: f64 = 10.0;

/// Where a density field came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    GroundTruth,
    ExternalFile,
}

/// Per-cell density (fraction of points) and occupancy logits on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: VoxelGrid,
    density: Vec<f64>,
    occupancy_logit: Vec<f64>,
    provenance: Provenance,
}

impl DensityField {
    pub fn new(
        grid: VoxelGrid,
        density: Vec<f64>,
        occupancy_logit: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = grid.cell_count();
        for len in [density.len(), occupancy_logit.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(bad) = density.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!(
                "density values must be finite and non-negative, found {bad}"
            )));
        }
        if occupancy_logit.iter().any(|l| l.is_nan()) {
            return Err(Error::invalid("occupancy logit is NaN"));
        }
        Ok(Self {
            grid,
            density,
            occupancy_logit,
            provenance,
        })
    }

    pub fn grid(&self) -> VoxelGrid {
        self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn occupancy_logit(&self) -> &[f64] {
        &self.occupancy_logit
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Expected point counts for a cloud of `n` points.
    pub fn counts(&self, n: usize) -> Vec<f64> {
        self.density.iter().map(|d| d * n as f64).collect()
    }

    /// Indices of cells with positive density.
    pub fn occupied_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.density
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, _)| i)
    }

    /// Occupancy labels in `{0, 1}` derived from the sign of the logits.
    pub fn occupancy_labels(&self) -> Vec<f64> {
        self.occupancy_logit
            .iter()
            .map(|l| if *l > 0.0 { 1.0 } else { 0.0 })
            .collect()
    }
}
