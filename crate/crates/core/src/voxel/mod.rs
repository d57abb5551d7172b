//! Voxelization: cubic grids, displacement encoding and density fields.

mod density;
mod field;
mod grid;
mod gridding;

pub use density::{density_ground_truth, splat_density, OCCUPANCY_EPS};
pub use field::{DensityField, Provenance, GROUND_TRUTH_LOGIT};
pub use grid::{VoxelGrid, MAX_RESOLUTION};
pub use gridding::{cell_vertex, grid_displacements, GriddingOutput};
