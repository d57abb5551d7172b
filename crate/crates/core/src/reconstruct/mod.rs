//! Point reconstruction from sampled cells.
//!
//! Coarse points are laid out on a plane fitted to the input points around
//! each cell center, spread by a per-cell shifted Halton sequence. Refinement
//! then projects every point onto a Gaussian-weighted local surface of its
//! nearest input points: a quadratic height field over the weighted
//! least-squares plane, or the plane itself when the quadratic is
//! underdetermined.

mod plane;

use std::path::Path;

use rayon::prelude::*;

pub use plane::{fit_plane, fit_quadric, Plane, Quadric};

use crate::error::{Error, Result};
use crate::halton::halton2;
use crate::pointcloud::{NeighborIndex, Point, PointCloud, Vector};
use crate::rng::{counter_uniform, stream_key};
use crate::sampler::CellSampleSet;
use crate::voxel::VoxelGrid;

/// 2D placement parameter of one generated point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacementParams {
    pub u: [f64; 2],
    pub cell: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    /// Neighborhood size for plane fits (at least 3).
    pub neighbors: usize,
    /// Largest distance a point may move during refinement.
    pub max_displacement: f64,
    pub enabled: bool,
}

impl RefineConfig {
    pub const DEFAULT_NEIGHBORS: usize = 8;

    /// Default settings with the displacement cap set to the cell diagonal.
    pub fn for_grid(grid: &VoxelGrid) -> Self {
        Self {
            neighbors: Self::DEFAULT_NEIGHBORS,
            max_displacement: grid.cell_diagonal(),
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neighbors < 3 {
            return Err(Error::invalid(format!(
                "refinement neighborhood must hold at least 3 points, got {}",
                self.neighbors
            )));
        }
        if !(self.max_displacement >= 0.0) {
            return Err(Error::invalid("max displacement must be non-negative"));
        }
        Ok(())
    }
}

/// Placement parameters for every point generated from `samples`, ordered by
/// cell then within-cell rank.
pub fn placement_params(samples: &CellSampleSet) -> Vec<PlacementParams> {
    samples
        .entries()
        .iter()
        .flat_map(|&(cell, m)| (0..m).map(move |rank| halton_param(cell, rank)))
        .collect()
}

/// Halton point `rank + 1` under a Cranley-Patterson shift keyed by the cell.
/// Distinct ranks give distinct parameters within a cell.
fn halton_param(cell: usize, rank: usize) -> PlacementParams {
    let key = stream_key(0, "halton-shift", cell as u64);
    let h = halton2(rank as u64 + 1);
    let u = [
        (h[0] + counter_uniform(key, 0)).fract(),
        (h[1] + counter_uniform(key, 1)).fract(),
    ];
    PlacementParams { u, cell }
}

fn clamp_to_cell(p: Point, center: &Point, grid: &VoxelGrid) -> Point {
    let d = grid.cell_diagonal();
    let half = 0.5 * (grid.cell_side() + d);
    let mut q = p;
    for a in 0..3 {
        q[a] = q[a].clamp(center[a] - half, center[a] + half);
    }
    let off = q - center;
    let len = off.norm();
    if len > d {
        center + off * (d / len)
    } else {
        q
    }
}

/// Deterministic offset of length at most `0.1 / R`.
fn fallback_jitter(cell: usize, rank: usize, grid: &VoxelGrid) -> Vector {
    let key = stream_key(cell as u64, "jitter", rank as u64);
    let v = Vector::new(
        2.0 * counter_uniform(key, 0) - 1.0,
        2.0 * counter_uniform(key, 1) - 1.0,
        2.0 * counter_uniform(key, 2) - 1.0,
    );
    v * (0.1 * grid.cell_side() / 3f64.sqrt())
}

fn neighbor_points(index: &NeighborIndex, query: &Point, k: usize) -> Vec<Point> {
    index
        .knn_sq(query, k)
        .into_iter()
        .map(|(i, _)| index.points()[i])
        .collect()
}

/// Places the points of one cell given its local plane (if any).
fn place_in_cell(
    plane: Option<&Plane>,
    grid: &VoxelGrid,
    params: &PlacementParams,
    rank: usize,
) -> Point {
    let center = grid.cell_center(params.cell);
    let raw = match plane {
        Some(plane) => {
            let anchor = plane.project(&center);
            let side = grid.cell_side();
            anchor
                + plane.axis_u * ((params.u[0] - 0.5) * side)
                + plane.axis_v * ((params.u[1] - 0.5) * side)
        }
        None => center + fallback_jitter(params.cell, rank, grid),
    };
    clamp_to_cell(raw, &center, grid)
}

/// Coarse reconstruction: `samples.total()` points in normalized coordinates,
/// each within one cell diagonal of its cell center.
pub fn place_coarse(
    samples: &CellSampleSet,
    grid: &VoxelGrid,
    input: &PointCloud,
    config: &RefineConfig,
) -> Result<PointCloud> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("no cells to reconstruct"));
    }
    input.require_normalized()?;
    let index = NeighborIndex::new(input.points());
    let points: Vec<Point> = samples
        .entries()
        .par_iter()
        .flat_map_iter(|&(cell, m)| {
            let neighbors = neighbor_points(&index, &grid.cell_center(cell), config.neighbors);
            let plane = fit_plane(&neighbors, None);
            (0..m)
                .map(|rank| place_in_cell(plane.as_ref(), grid, &halton_param(cell, rank), rank))
                .collect::<Vec<_>>()
        })
        .collect();
    PointCloud::with_normalization(points, input.normalization())
}

/// Moves each point onto the Gaussian-weighted local surface of its nearest
/// input points, limited to `max_displacement`.
pub fn refine(coarse: &PointCloud, input: &PointCloud, config: &RefineConfig) -> Result<PointCloud> {
    config.validate()?;
    if !config.enabled || input.len() < config.neighbors {
        return Ok(coarse.clone());
    }
    let index = NeighborIndex::new(input.points());
    let points: Vec<Point> = coarse
        .points()
        .par_iter()
        .map(|p| refine_point(p, &index, config))
        .collect();
    PointCloud::with_normalization(points, coarse.normalization())
}

fn refine_point(p: &Point, index: &NeighborIndex, config: &RefineConfig) -> Point {
    let found = index.knn_sq(p, config.neighbors);
    let bandwidth = found.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / found.len() as f64;
    if !(bandwidth > 0.0) {
        return *p;
    }
    let h2 = bandwidth * bandwidth;
    let pts: Vec<Point> = found.iter().map(|(i, _)| index.points()[*i]).collect();
    let weights: Vec<f64> = found.iter().map(|(_, d2)| (-d2 / h2).exp()).collect();
    let Some(plane) = fit_plane(&pts, Some(&weights)) else {
        return *p;
    };
    let target = match fit_quadric(&plane, &pts, &weights, bandwidth) {
        Some(quadric) => quadric.project(p),
        None => plane.project(p),
    };
    let step = target - p;
    let len = step.norm();
    if len > config.max_displacement {
        p + step * (config.max_displacement / len)
    } else {
        p + step
    }
}

/// Loads points produced elsewhere (e.g. by a trained model) for evaluation.
pub fn load_external_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    crate::io::read_pointcloud(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_cloud(z: f64, n: usize) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = -0.45 + 0.9 * i as f64 / (n - 1) as f64;
                let y = -0.45 + 0.9 * j as f64 / (n - 1) as f64;
                pts.push(Point::new(x, y, z));
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn centered_parameter_lands_on_projection() {
        let grid = VoxelGrid::new(8).unwrap();
        let cell = grid.index(4, 4, 4);
        let center = grid.cell_center(cell);
        let nbrs: Vec<Point> = (0..8)
            .map(|i| {
                let a = i as f64 * std::f64::consts::FRAC_PI_4;
                Point::new(center.x + 0.05 * a.cos(), center.y + 0.05 * a.sin(), 0.0)
            })
            .collect();
        let plane = fit_plane(&nbrs, None).unwrap();
        let p = place_in_cell(Some(&plane), &grid, &PlacementParams { u: [0.5, 0.5], cell }, 0);
        // Projection of the cell center onto z = 0.
        assert!((p - Point::new(center.x, center.y, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coarse_points_stay_near_cells_and_on_plane() {
        let grid = VoxelGrid::new(8).unwrap();
        let input = plane_cloud(0.0625, 12);
        let cells: Vec<(usize, usize)> = (1..7).map(|i| (grid.index(i, 3, 4), i)).collect();
        let samples = CellSampleSet::new(cells).unwrap();
        let cfg = RefineConfig::for_grid(&grid);
        let coarse = place_coarse(&samples, &grid, &input, &cfg).unwrap();
        assert_eq!(coarse.len(), samples.total());
        for (p, cell) in coarse.points().iter().zip(samples.expanded()) {
            assert!((p - grid.cell_center(cell)).norm() <= grid.cell_diagonal() + 1e-15);
            assert!((p.z - 0.0625).abs() < 1e-12);
        }
    }

    #[test]
    fn params_distinct_within_cell() {
        let samples = CellSampleSet::new(vec![(3, 50), (9, 2)]).unwrap();
        let params = placement_params(&samples);
        assert_eq!(params.len(), 52);
        let mut u: Vec<[f64; 2]> = params[..50].iter().map(|p| p.u).collect();
        u.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        u.dedup();
        assert_eq!(u.len(), 50);
    }

    #[test]
    fn degenerate_neighborhood_falls_back_to_center() {
        let grid = VoxelGrid::new(4).unwrap();
        let input = PointCloud::from_xyz(&[[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]).unwrap();
        let samples = CellSampleSet::new(vec![(grid.index(1, 2, 2), 3)]).unwrap();
        let cfg = RefineConfig::for_grid(&grid);
        let coarse = place_coarse(&samples, &grid, &input, &cfg).unwrap();
        let c = grid.cell_center(grid.index(1, 2, 2));
        for p in coarse.points() {
            assert!((p - c).norm() <= 0.1 / 4.0 + 1e-15);
        }
    }

    #[test]
    fn refine_projects_raised_points() {
        let grid = VoxelGrid::new(16).unwrap();
        let input = plane_cloud(0.0, 30);
        let cfg = RefineConfig::for_grid(&grid);
        let h = 0.5 * grid.cell_diagonal();
        let coarse = PointCloud::from_xyz(&[[0.01, 0.02, h], [-0.2, 0.1, -h], [0.1, 0.1, 0.0]])
            .unwrap();
        let out = refine(&coarse, &input, &cfg).unwrap();
        for (p, q) in out.points().iter().zip(coarse.points()) {
            assert!(p.z.abs() < 1e-6);
            assert!((p.x - q.x).abs() < 1e-12 && (p.y - q.y).abs() < 1e-12);
        }
        // On-plane point is a fixed point.
        assert_eq!(out.points()[2], coarse.points()[2]);
    }

    #[test]
    fn refine_caps_displacement() {
        let grid = VoxelGrid::new(16).unwrap();
        let input = plane_cloud(0.0, 30);
        let cfg = RefineConfig::for_grid(&grid);
        let coarse = PointCloud::from_xyz(&[[0.0, 0.0, 0.4]]).unwrap();
        let out = refine(&coarse, &input, &cfg).unwrap();
        assert!((out.points()[0].z - (0.4 - grid.cell_diagonal())).abs() < 1e-12);
    }

    #[test]
    fn refine_is_identity_for_tiny_inputs() {
        let grid = VoxelGrid::new(16).unwrap();
        let input = PointCloud::from_xyz(&[[0.0; 3], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]]).unwrap();
        let coarse = PointCloud::from_xyz(&[[0.0, 0.0, 0.05]]).unwrap();
        let out = refine(&coarse, &input, &RefineConfig::for_grid(&grid)).unwrap();
        assert_eq!(out, coarse);
    }

    #[test]
    fn config_rejects_small_neighborhoods() {
        let grid = VoxelGrid::new(8).unwrap();
        let cfg = RefineConfig {
            neighbors: 2,
            ..RefineConfig::for_grid(&grid)
        };
        assert!(cfg.validate().is_err());
    }
}
