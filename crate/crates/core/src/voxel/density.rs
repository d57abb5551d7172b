use rayon::prelude::*;

use super::field::{DensityField, Provenance, GROUND_TRUTH_LOGIT};
use super::grid::VoxelGrid;
use crate::error::Result;
use crate::pointcloud::PointCloud;

/// Clamp applied to the smoothed occupancy indicator before taking its logit.
pub const OCCUPANCY_EPS: f64 = 1e-4;

/// Splat weights are accumulated in fixed point with this many fractional
/// bits, which makes the sum exact and independent of point order.
const FIXED_BITS: u32 = 40;
const FIXED_ONE: u64 = 1 << FIXED_BITS;

/// Density equal to the fraction of points per cell, with hard `±10` logits.
pub fn density_ground_truth(cloud: &PointCloud, grid: &VoxelGrid) -> Result<DensityField> {
    cloud.require_normalized()?;
    let mut counts = vec![0usize; grid.cell_count()];
    for p in cloud.points() {
        counts[grid.cell_of(p)] += 1;
    }
    let n = cloud.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / n).collect();
    let logits = counts
        .iter()
        .map(|&c| {
            if c > 0 {
                GROUND_TRUTH_LOGIT
            } else {
                -GROUND_TRUTH_LOGIT
            }
        })
        .collect();
    DensityField::new(*grid, density, logits, Provenance::GroundTruth)
}

/// Trilinear weights of a normalized coordinate onto the two surrounding cell
/// centers along one axis, as `(lower cell, upper cell, upper weight)`.
fn axis_weights(x: f64, resolution: usize) -> (usize, usize, f64) {
    let g = (x + 0.5) * resolution as f64 - 0.5;
    let base = g.floor();
    let t = g - base;
    let last = resolution as i64 - 1;
    let lo = (base as i64).clamp(0, last) as usize;
    let hi = (base as i64 + 1).clamp(0, last) as usize;
    (lo, hi, t)
}

/// Raw splatted mass per cell in fixed point. Every point contributes exactly
/// `FIXED_ONE`, so the total is `N * FIXED_ONE`.
fn splat_mass(cloud: &PointCloud, grid: &VoxelGrid) -> Vec<u64> {
    let r = grid.resolution();
    let mut mass = vec![0u64; grid.cell_count()];
    for p in cloud.points() {
        let ax = [
            axis_weights(p.x, r),
            axis_weights(p.y, r),
            axis_weights(p.z, r),
        ];
        let mut cells = [0usize; 8];
        let mut w = [0u64; 8];
        let mut total = 0u64;
        let mut heaviest = 0;
        for v in 0..8 {
            let pick = |a: usize, bit: usize| {
                let (lo, hi, t) = ax[a];
                if bit == 1 {
                    (hi, t)
                } else {
                    (lo, 1.0 - t)
                }
            };
            let (i, wx) = pick(0, (v >> 2) & 1);
            let (j, wy) = pick(1, (v >> 1) & 1);
            let (k, wz) = pick(2, v & 1);
            cells[v] = grid.index(i, j, k);
            w[v] = (wx * wy * wz * FIXED_ONE as f64).round() as u64;
            total += w[v];
            if w[v] > w[heaviest] {
                heaviest = v;
            }
        }
        // Push the rounding residue onto the heaviest corner.
        w[heaviest] = (w[heaviest] + FIXED_ONE).wrapping_sub(total);
        for v in 0..8 {
            mass[cells[v]] += w[v];
        }
    }
    mass
}

/// Mean of `values` over the in-grid `(2s+1)³` box around each cell.
fn box_smooth(values: &[f64], grid: &VoxelGrid, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return values.to_vec();
    }
    let window = ((2 * radius + 1) as f64).powi(3);
    (0..grid.cell_count())
        .into_par_iter()
        .map(|c| grid.neighborhood(c, radius).map(|n| values[n]).sum::<f64>() / window)
        .collect()
}

/// Analytic density backend: trilinear splatting onto cell centers with
/// optional box smoothing.
pub fn splat_density(
    cloud: &PointCloud,
    grid: &VoxelGrid,
    smoothing_radius: usize,
) -> Result<DensityField> {
    cloud.require_normalized()?;
    let mass = splat_mass(cloud, grid);
    let raw: Vec<f64> = mass.iter().map(|&m| m as f64 / FIXED_ONE as f64).collect();
    let smoothed = box_smooth(&raw, grid, smoothing_radius);
    let total: f64 = smoothed.iter().sum();
    let density = smoothed.iter().map(|m| m / total).collect();

    let indicator: Vec<f64> = mass.iter().map(|&m| if m > 0 { 1.0 } else { 0.0 }).collect();
    let logits = box_smooth(&indicator, grid, smoothing_radius)
        .into_iter()
        .map(|p| {
            let p = p.clamp(OCCUPANCY_EPS, 1.0 - OCCUPANCY_EPS);
            (p / (1.0 - p)).ln()
        })
        .collect();
    DensityField::new(*grid, density, logits, Provenance::Analytic)
}
