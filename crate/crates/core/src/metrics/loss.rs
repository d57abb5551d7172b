use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::sampler::CellSampleSet;
use crate::voxel::VoxelGrid;

/// Penalty on points that stray beyond one cell diagonal from the center of
/// the cell that generated them: `Σ max(‖p − c‖ − d, 0)`.
///
/// Point `i` belongs to `cells.expanded()[i]`.
pub fn reg_loss(points: &PointCloud, cells: &CellSampleSet, grid: &VoxelGrid) -> Result<f64> {
    let owners = cells.expanded();
    if owners.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: owners.len(),
            actual: points.len(),
        });
    }
    let d = grid.cell_diagonal();
    Ok(points
        .points()
        .iter()
        .zip(owners)
        .map(|(p, c)| ((p - grid.cell_center(c)).norm() - d).max(0.0))
        .sum())
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            actual: b,
        });
    }
    if a == 0 {
        return Err(Error::invalid("loss over zero cells"));
    }
    Ok(())
}

/// Mean binary cross-entropy of `logits` against labels in `{0, 1}`,
/// evaluated as `max(x, 0) − x·y + ln(1 + e^{−|x|})`.
pub fn bce_loss(logits: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(logits.len(), labels.len())?;
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
        .sum();
    Ok(sum / logits.len() as f64)
}

/// Mean squared error over all cells.
pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let sum: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub sharp_cd: f64,
    pub gc: f64,
    pub reg: f64,
    pub bce: f64,
    pub mse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sharp_cd: 300.0,
            gc: 0.01,
            reg: 0.3,
            bce: 100.0,
            mse: 1e10,
        }
    }
}

/// The individual terms of the training objective. `coarse` terms compare the
/// coarse points with the ground truth, `refined` the refined points.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub cd_coarse: f64,
    pub sharp_cd_coarse: f64,
    pub cd_refined: f64,
    pub gc_refined: f64,
    pub reg_coarse: f64,
    pub bce: f64,
    pub mse: f64,
}

impl LossParts {
    fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("cd_coarse", self.cd_coarse),
            ("sharp_cd_coarse", self.sharp_cd_coarse),
            ("cd_refined", self.cd_refined),
            ("gc_refined", self.gc_refined),
            ("reg_coarse", self.reg_coarse),
            ("bce", self.bce),
            ("mse", self.mse),
        ]
    }
}

/// Weighted sum of all loss terms.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> Result<f64> {
    for (name, v) in parts.named() {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    let w = weights;
    if [w.sharp_cd, w.gc, w.reg, w.bce, w.mse]
        .iter()
        .any(|x| !(*x >= 0.0) || !x.is_finite())
    {
        return Err(Error::invalid("loss weights must be finite and non-negative"));
    }
    Ok(parts.cd_coarse
        + w.sharp_cd * parts.sharp_cd_coarse
        + parts.cd_refined
        + w.gc * parts.gc_refined
        + w.reg * parts.reg_coarse
        + w.bce * parts.bce
        + w.mse * parts.mse)
}
