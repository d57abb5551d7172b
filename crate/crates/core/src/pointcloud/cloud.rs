use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Affine map between normalized coordinates and source units:
/// `source = normalized * scale + center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: Vector,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        center: Vector3::new(0.0, 0.0, 0.0),
        scale: 1.0,
    };

    /// Maps a source-unit point into the normalized frame.
    pub fn apply(&self, p: &Point) -> Point {
        Point::from((p.coords - self.center) / self.scale)
    }

    /// Maps a normalized point back to source units.
    pub fn invert(&self, p: &Point) -> Point {
        Point::from(p.coords * self.scale + self.center)
    }

    /// `self` applied after `inner`: the map from `inner`'s normalized frame
    /// through `self`'s normalized frame back to source units.
    fn compose(&self, inner: &Normalization) -> Normalization {
        Normalization {
            center: inner.center * self.scale + self.center,
            scale: self.scale * inner.scale,
        }
    }
}

/// An ordered, non-empty set of 3D points together with the normalization
/// that maps its coordinates back to source units.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    normalization: Normalization,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        Self::with_normalization(points, Normalization::IDENTITY)
    }

    pub fn with_normalization(points: Vec<Point>, normalization: Normalization) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(Self {
            points,
            normalization,
        })
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point::new(c[0], c[1], c[2])).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn centroid(&self) -> Point {
        let sum = self
            .points
            .iter()
            .fold(Vector::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / self.points.len() as f64)
    }

    /// Centers the bounding box at the origin and scales its longest side to 1.
    ///
    /// The recorded normalization composes with any existing one, so
    /// [`PointCloud::denormalize`] always returns to the original source units.
    pub fn normalize(&self) -> Result<PointCloud> {
        let (lo, hi) = self.bounding_box();
        let extent = hi - lo;
        let scale = extent.max();
        if !(scale > 0.0) {
            return Err(Error::DegenerateCloud);
        }
        let local = Normalization {
            center: (lo.coords + hi.coords) * 0.5,
            scale,
        };
        let points = self
            .points
            .iter()
            .map(|p| {
                let q = local.apply(p);
                // Rounding can push an extreme coordinate a few ulps past the face.
                Point::new(
                    q.x.clamp(-0.5, 0.5),
                    q.y.clamp(-0.5, 0.5),
                    q.z.clamp(-0.5, 0.5),
                )
            })
            .collect();
        PointCloud::with_normalization(points, self.normalization.compose(&local))
    }

    /// Maps the points back to source units and resets the normalization.
    pub fn denormalize(&self) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| self.normalization.invert(p))
            .collect();
        PointCloud {
            points,
            normalization: Normalization::IDENTITY,
        }
    }

    /// True when every coordinate lies within `[-0.5 - tol, 0.5 + tol]`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.max_abs_coordinate() <= 0.5 + tol
    }

    pub(crate) fn max_abs_coordinate(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let m = self.max_abs_coordinate();
        if m > 0.5 + 1e-9 || !m.is_finite() {
            return Err(Error::NotNormalized { value: m });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_box() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let n = cloud.normalize().unwrap();
        assert_eq!(n.points()[0], Point::new(-0.5, 0.0, 0.0));
        assert_eq!(n.points()[1], Point::new(0.5, 0.0, 0.0));
        assert_eq!(n.normalization().center, Vector::new(1.0, 0.0, 0.0));
        assert_eq!(n.normalization().scale, 2.0);
    }

    #[test]
    fn normalized_input_is_fixed() {
        let cloud =
            PointCloud::from_xyz(&[[-0.5, -0.25, 0.1], [0.5, 0.25, -0.1], [0.0, 0.0, 0.0]])
                .unwrap();
        let n = cloud.normalize().unwrap();
        assert_eq!(n.points(), cloud.points());
        assert_eq!(n.normalization().scale, 1.0);
    }

    #[test]
    fn scaled_shifted_cube_maps_to_unit_cube() {
        let mut corners = Vec::new();
        for i in 0..8 {
            let c = [(i >> 2) & 1, (i >> 1) & 1, i & 1].map(|b| b as f64 * 7.0 + 3.0);
            corners.push(c);
        }
        let n = PointCloud::from_xyz(&corners).unwrap().normalize().unwrap();
        // (7b + 3 - 6.5) / 7 = b - 0.5
        for (p, c) in n.points().iter().zip(&corners) {
            for a in 0..3 {
                let expected = (c[a] - 3.0) / 7.0 - 0.5;
                assert!((p[a] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let cloud = PointCloud::from_xyz(&[[1.0, 2.0, 3.0]; 4]).unwrap();
        assert!(matches!(cloud.normalize(), Err(Error::DegenerateCloud)));
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn nested_normalization_round_trips() {
        let cloud = PointCloud::from_xyz(&[[10.0, 5.0, 0.0], [14.0, 6.0, 1.0], [11.0, 5.5, 3.0]])
            .unwrap();
        let once = cloud.normalize().unwrap();
        let sub = PointCloud::with_normalization(
            once.points()[..2].to_vec(),
            once.normalization(),
        )
        .unwrap();
        let twice = sub.normalize().unwrap();
        let back = twice.denormalize();
        for (p, q) in back.points().iter().zip(cloud.points()) {
            assert!((p - q).norm() < 1e-12);
        }
    }
}
