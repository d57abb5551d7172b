//! Farthest point sampling over grid cells, plain and density-guided.
//!
//! Density-guided FPS scales each candidate's distance to the selected set by
//! its weight, `d̂ᵢ = wᵢ · dᵢ`, so sparse far-away cells lose to dense ones.

use super::cells::CellSampleSet;
use crate::error::{Error, Result};
use crate::pointcloud::{greedy_farthest, Point, Score};
use crate::voxel::VoxelGrid;

/// Density-guided FPS over arbitrary positions. Starts at the largest
/// weight (lowest index on ties) and returns positions' indices in
/// selection order.
pub fn density_guided_fps(positions: &[Point], weights: &[f64], m: usize) -> Result<Vec<usize>> {
    check_count(positions.len(), m)?;
    if weights.len() != positions.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("D-FPS weights must be finite and non-negative"));
    }
    let start = argmax_lowest(weights);
    Ok(greedy_farthest(positions, Score::Weighted(weights), start, m))
}

/// Plain FPS over positions, started at index 0.
pub fn vanilla_fps(positions: &[Point], m: usize) -> Result<Vec<usize>> {
    check_count(positions.len(), m)?;
    Ok(greedy_farthest(positions, Score::Plain, 0, m))
}

fn check_count(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("no candidate cells"));
    }
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "cannot select {m} of {n} candidate cells"
        )));
    }
    Ok(())
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn candidate_centers(candidates: &CellSampleSet, grid: &VoxelGrid) -> Vec<Point> {
    candidates.cells().map(|c| grid.cell_center(c)).collect()
}

/// D-FPS over the distinct cells of `candidates`, weighted by `weights[cell]`.
/// Returns cell indices in selection order.
pub fn dfps_cells(
    candidates: &CellSampleSet,
    weights: &[f64],
    grid: &VoxelGrid,
    m: usize,
) -> Result<Vec<usize>> {
    let cells: Vec<usize> = candidates.cells().collect();
    let w: Vec<f64> = cells
        .iter()
        .map(|&c| {
            weights.get(c).copied().ok_or(Error::LengthMismatch {
                expected: grid.cell_count(),
                actual: weights.len(),
            })
        })
        .collect::<Result<_>>()?;
    let order = density_guided_fps(&candidate_centers(candidates, grid), &w, m)?;
    Ok(order.into_iter().map(|i| cells[i]).collect())
}

/// Vanilla FPS over the distinct cells of `candidates`; the start rule is
/// that of [`dfps_cells`] with unit weights, i.e. the lowest cell index.
pub fn fps_cells(candidates: &CellSampleSet, grid: &VoxelGrid, m: usize) -> Result<Vec<usize>> {
    let cells: Vec<usize> = candidates.cells().collect();
    let order = vanilla_fps(&candidate_centers(candidates, grid), m)?;
    Ok(order.into_iter().map(|i| cells[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted() -> (Vec<Point>, Vec<f64>) {
        (
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(10.0, 10.0, 10.0),
            ],
            vec![1.0, 1.0, 0.01],
        )
    }

    #[test]
    fn dfps_skips_low_density_outlier() {
        let (pos, w) = planted();
        // d̂(B) = 1.0 * 1.0 beats d̂(O) = 0.01 * 17.32
        assert_eq!(density_guided_fps(&pos, &w, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn vanilla_fps_takes_outlier() {
        let (pos, _) = planted();
        assert_eq!(vanilla_fps(&pos, 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn uniform_weights_match_vanilla() {
        let pos: Vec<Point> = (0..50)
            .map(|i| {
                let t = i as f64;
                Point::new((t * 1.3).sin(), (t * 0.7).cos(), (t * 2.9).sin() * 0.5)
            })
            .collect();
        let w = vec![0.37; pos.len()];
        assert_eq!(
            density_guided_fps(&pos, &w, 30).unwrap(),
            vanilla_fps(&pos, 30).unwrap()
        );
    }

    #[test]
    fn start_is_heaviest() {
        let (pos, _) = planted();
        let order = density_guided_fps(&pos, &[0.2, 0.9, 0.9], 1).unwrap();
        assert_eq!(order, vec![1]);
    }

    #[test]
    fn zero_weight_selected_last() {
        let pos: Vec<Point> = (0..6).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        let w = [1.0, 0.0, 0.5, 0.0, 0.2, 0.9];
        let order = density_guided_fps(&pos, &w, 6).unwrap();
        let first_zero = order.iter().position(|&i| w[i] == 0.0).unwrap();
        assert_eq!(first_zero, 4);
    }

    #[test]
    fn cells_on_a_line() {
        let grid = VoxelGrid::new(4).unwrap();
        let cand = CellSampleSet::new((0..4).map(|i| (grid.index(i, 0, 0), 1)).collect()).unwrap();
        let order = fps_cells(&cand, &grid, 2).unwrap();
        assert_eq!(order, vec![grid.index(0, 0, 0), grid.index(3, 0, 0)]);
        assert_eq!(fps_cells(&cand, &grid, 1).unwrap(), vec![0]);
        let mut all = fps_cells(&cand, &grid, 4).unwrap();
        all.sort();
        assert_eq!(all, cand.cells().collect::<Vec<_>>());
    }

    #[test]
    fn errors() {
        let grid = VoxelGrid::new(4).unwrap();
        let empty = CellSampleSet::from_draws(std::iter::empty());
        assert!(fps_cells(&empty, &grid, 1).is_err());
        let one = CellSampleSet::from_draws([3]);
        assert!(dfps_cells(&one, &[1.0; 64], &grid, 2).is_err());
    }
}
