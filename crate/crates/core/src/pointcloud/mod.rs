//! Point-set types and spatial primitives.

mod cloud;
mod fps;
mod knn;

pub use cloud::{Normalization, Point, PointCloud, Vector};
pub use fps::farthest_point_sampling;
pub(crate) use fps::{greedy_farthest, Score};
pub use knn::NeighborIndex;
