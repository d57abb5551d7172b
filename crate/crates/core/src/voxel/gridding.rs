use super::grid::VoxelGrid;
use crate::error::Result;
use crate::pointcloud::{Point, PointCloud, Vector};

/// Per-point displacements to the eight vertices of the containing cell.
///
/// Vertex `v` of a cell has lattice offset `((v >> 2) & 1, (v >> 1) & 1, v & 1)`
/// from the cell's lower corner.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddingOutput {
    pub displacements: Vec<[Vector; 8]>,
    pub cells: Vec<usize>,
}

impl GriddingOutput {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Position of vertex `v` of cell `cell`.
pub fn cell_vertex(grid: &VoxelGrid, cell: usize, v: usize) -> Point {
    let [i, j, k] = grid.coords(cell);
    let r = grid.resolution() as f64;
    let at = |c: usize, bit: usize| (c + bit) as f64 / r - 0.5;
    Point::new(
        at(i, (v >> 2) & 1),
        at(j, (v >> 1) & 1),
        at(k, v & 1),
    )
}

/// Point-minus-vertex displacements for every point of a normalized cloud.
pub fn grid_displacements(cloud: &PointCloud, grid: &VoxelGrid) -> Result<GriddingOutput> {
    cloud.require_normalized()?;
    let mut displacements = Vec::with_capacity(cloud.len());
    let mut cells = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let cell = grid.cell_of(p);
        let mut rows = [Vector::zeros(); 8];
        for (v, row) in rows.iter_mut().enumerate() {
            *row = p - cell_vertex(grid, cell, v);
        }
        displacements.push(rows);
        cells.push(cell);
    }
    Ok(GriddingOutput {
        displacements,
        cells,
    })
}
