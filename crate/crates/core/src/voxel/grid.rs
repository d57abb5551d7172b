use crate::error::{Error, Result};
use crate::pointcloud::Point;

pub const MAX_RESOLUTION: usize = 64;

/// A cubic grid of `R³` cells tiling the normalized cube `[-0.5, 0.5]³`.
///
/// Cells are indexed row-major as `(i * R + j) * R + k`. Cells are half-open
/// except along the top face, so a coordinate of exactly `+0.5` falls in the
/// last cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    resolution: usize,
}

impl VoxelGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::invalid(format!(
                "grid resolution {resolution} outside 1..={MAX_RESOLUTION}"
            )));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn cell_side(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Length of a cell's space diagonal, `√3 / R`.
    pub fn cell_diagonal(&self) -> f64 {
        3f64.sqrt() / self.resolution as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.resolution && j < self.resolution && k < self.resolution);
        (i * self.resolution + j) * self.resolution + k
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let r = self.resolution;
        [index / (r * r), (index / r) % r, index % r]
    }

    pub fn cell_center(&self, index: usize) -> Point {
        let [i, j, k] = self.coords(index);
        let r = self.resolution as f64;
        Point::new(
            (i as f64 + 0.5) / r - 0.5,
            (j as f64 + 0.5) / r - 0.5,
            (k as f64 + 0.5) / r - 0.5,
        )
    }

    /// Lattice coordinate of the cell containing `x` along one axis.
    pub(crate) fn axis_cell(&self, x: f64) -> usize {
        let c = ((x + 0.5) * self.resolution as f64).floor();
        (c.max(0.0) as usize).min(self.resolution - 1)
    }

    /// Cell containing a normalized point. Points outside the cube are
    /// clamped to the nearest boundary cell.
    pub fn cell_of(&self, p: &Point) -> usize {
        self.index(self.axis_cell(p.x), self.axis_cell(p.y), self.axis_cell(p.z))
    }

    /// The 26-connected neighbours of a cell that lie inside the grid.
    pub fn neighbors26(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighborhood(index, 1).filter(move |&c| c != index)
    }

    /// All in-grid cells within Chebyshev distance `radius`, including the cell itself.
    pub fn neighborhood(&self, index: usize, radius: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.coords(index);
        let r = self.resolution;
        let span = move |c: usize| c.saturating_sub(radius)..(c + radius + 1).min(r);
        span(i).flat_map(move |a| {
            span(j).flat_map(move |b| span(k).map(move |c| self.index(a, b, c)))
        })
    }
}
