//! Distance metrics and training loss terms.

mod distance;
mod loss;
mod mesh;
mod report;

pub use distance::{chamfer, hausdorff, sharp_chamfer, SHARP_CD_TEMPERATURE};
pub use loss::{bce_loss, mse_loss, reg_loss, total_loss, LossParts, LossWeights};
pub use mesh::{
    closest_point_on_triangle, point_to_mesh, point_to_mesh_distances, triangle_distance_sq,
    TriangleMesh,
};
pub use report::{MetricsReport, REPORT_SCALE};
