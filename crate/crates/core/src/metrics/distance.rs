use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::{NeighborIndex, PointCloud};

/// Default temperature of the sharpened Chamfer distance.
pub const SHARP_CD_TEMPERATURE: f64 = 1e-2;

/// Squared distance from every point of `from` to its nearest point in `to`.
fn directed_sq(from: &PointCloud, to: &PointCloud) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = NeighborIndex::new(to.points());
    Ok(from
        .points()
        .par_iter()
        .map(|p| index.nearest_sq(p).1)
        .collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Log-mean-exp at temperature `tau`: a smooth maximum that tends to the
/// mean as `tau` grows and to the maximum as it shrinks.
fn smooth_max(values: &[f64], tau: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = values.iter().map(|v| ((v - max) / tau).exp()).sum::<f64>() / values.len() as f64;
    tau * m.ln() + max
}

/// Bidirectional mean of squared nearest-neighbor distances.
pub fn chamfer(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    Ok(mean(&directed_sq(p, q)?) + mean(&directed_sq(q, p)?))
}

/// Chamfer distance with each directional mean replaced by a log-mean-exp
/// smooth maximum at temperature `tau`.
pub fn sharp_chamfer(p: &PointCloud, q: &PointCloud, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    let forward = smooth_max(&directed_sq(p, q)?, tau);
    let backward = smooth_max(&directed_sq(q, p)?, tau);
    // The smooth maximum of non-negative values can round a hair below zero.
    Ok((forward + backward).max(0.0))
}

/// Symmetric Hausdorff distance (unsquared).
pub fn hausdorff(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    let fmax = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    Ok(fmax(directed_sq(p, q)?).max(fmax(directed_sq(q, p)?)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(c: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_xyz(c).unwrap()
    }

    #[test]
    fn chamfer_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        let two = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&two, &b).unwrap(), 2.0);
    }

    #[test]
    fn sharp_chamfer_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(sharp_chamfer(&a, &b, SHARP_CD_TEMPERATURE).unwrap(), chamfer(&a, &b).unwrap());
        let p = cloud(&[[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [0.9, 0.0, 0.4]]);
        let q = cloud(&[[0.1, 0.0, 0.0], [0.5, 0.5, 0.5]]);
        assert_eq!(sharp_chamfer(&p, &p, SHARP_CD_TEMPERATURE).unwrap(), 0.0);
        let limit = sharp_chamfer(&p, &q, 1e6).unwrap();
        assert!((limit - chamfer(&p, &q).unwrap()).abs() < 1e-6);
        assert!(sharp_chamfer(&p, &q, SHARP_CD_TEMPERATURE).unwrap() > chamfer(&p, &q).unwrap());
        assert!(sharp_chamfer(&p, &q, 0.0).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        let q = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let p = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 5.0, 0.0]]);
        assert_eq!(hausdorff(&p, &q).unwrap(), 5.0);
        assert_eq!(hausdorff(&q, &p).unwrap(), 5.0);
    }
}
