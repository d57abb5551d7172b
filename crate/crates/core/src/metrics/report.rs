use std::fmt::Write as _;

use super::distance::{chamfer, hausdorff};
use super::loss::LossParts;
use super::mesh::{point_to_mesh, TriangleMesh};
use crate::error::{Error, Result};
use crate::pointcloud::{Normalization, PointCloud};

/// Reported values are multiplied by this factor.
pub const REPORT_SCALE: f64 = 1e3;

/// Evaluation metrics in the ground truth's normalized frame (unscaled).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub cd: f64,
    pub hd: f64,
    pub p2f: Option<(f64, f64)>,
    pub losses: Option<LossParts>,
}

fn normalized(cloud: &PointCloud, frame: &Normalization) -> Result<PointCloud> {
    PointCloud::new(cloud.points().iter().map(|p| frame.apply(p)).collect())
}

impl MetricsReport {
    /// Compares `pred` with `truth` (and optionally the true surface) after
    /// mapping everything into the unit-cube frame of `truth`.
    pub fn evaluate(
        pred: &PointCloud,
        truth: &PointCloud,
        mesh: Option<&TriangleMesh>,
    ) -> Result<Self> {
        let frame = truth.denormalize().normalize()?.normalization();
        let pred = normalized(&pred.denormalize(), &frame)?;
        let truth = normalized(&truth.denormalize(), &frame)?;
        let p2f = match mesh {
            Some(mesh) => {
                let vertices = mesh.vertices().iter().map(|v| frame.apply(v)).collect();
                let mesh = TriangleMesh::new(vertices, mesh.faces().to_vec())?;
                Some(point_to_mesh(&pred, &mesh)?)
            }
            None => None,
        };
        let report = Self {
            cd: chamfer(&pred, &truth)?,
            hd: hausdorff(&pred, &truth)?,
            p2f,
            losses: None,
        };
        report.check()?;
        Ok(report)
    }

    fn check(&self) -> Result<()> {
        let mut values = vec![("cd", self.cd), ("hd", self.hd)];
        if let Some((mean, max)) = self.p2f {
            values.extend([("p2f_mean", mean), ("p2f_max", max)]);
        }
        for (name, v) in values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }

    /// `(key, value × 10³)` pairs in a fixed order.
    pub fn scaled_values(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("cd", self.cd * REPORT_SCALE), ("hd", self.hd * REPORT_SCALE)];
        if let Some((mean, max)) = self.p2f {
            out.push(("p2f_mean", mean * REPORT_SCALE));
            out.push(("p2f_max", max * REPORT_SCALE));
        }
        if let Some(l) = &self.losses {
            out.extend([
                ("loss_cd_coarse", l.cd_coarse * REPORT_SCALE),
                ("loss_sharp_cd_coarse", l.sharp_cd_coarse * REPORT_SCALE),
                ("loss_cd_refined", l.cd_refined * REPORT_SCALE),
                ("loss_gc_refined", l.gc_refined * REPORT_SCALE),
                ("loss_reg_coarse", l.reg_coarse * REPORT_SCALE),
                ("loss_bce", l.bce * REPORT_SCALE),
                ("loss_mse", l.mse * REPORT_SCALE),
            ]);
        }
        out
    }

    /// One `key=value` line per metric.
    pub fn to_key_values(&self) -> String {
        self.scaled_values()
            .into_iter()
            .fold(String::new(), |mut s, (k, v)| {
                let _ = writeln!(s, "{k}={v:.6}");
                s
            })
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("metric           value (x1e3)\n");
        for (k, v) in self.scaled_values() {
            let _ = writeln!(s, "{k:<16} {v:>12.6}");
        }
        s
    }
}
