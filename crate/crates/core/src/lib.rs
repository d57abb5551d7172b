//! Voxel-based point cloud upsampling.
//!
//! A sparse cloud is normalized into a cubic voxel grid, turned into a
//! per-cell density field, resampled with multinomial candidates reduced by
//! density-guided farthest point sampling, and reconstructed into points
//! inside the sampled cells. The crate also provides the distance metrics and
//! training losses used to evaluate upsampled clouds, a latent
//! geometric-consistency measure over surface patches, and the patch-based
//! inference pipeline with its sampling diagnostics.

pub mod consistency;
pub mod error;
pub mod halton;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pointcloud;
pub mod reconstruct;
pub mod rng;
pub mod sampler;
pub mod voxel;

pub use error::{Error, Result};
pub use pointcloud::{NeighborIndex, Normalization, Point, PointCloud, Vector};
