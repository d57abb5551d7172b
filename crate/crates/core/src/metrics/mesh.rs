use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::{NeighborIndex, Point, PointCloud};

/// An indexed triangle mesh. Faces with zero area are dropped on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(bad) = faces.iter().flatten().find(|&&i| i >= vertices.len()) {
            return Err(Error::invalid(format!(
                "face references vertex {bad} but the mesh has {} vertices",
                vertices.len()
            )));
        }
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| {
                let [a, b, c] = f.map(|i| vertices[i]);
                (b - a).cross(&(c - a)).norm_squared() > 0.0
            })
            .collect();
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        self.faces[face].map(|i| self.vertices[i])
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }
}

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision
/// Detection, 5.1.5), covering vertex, edge and interior regions.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    closest_feature(p, a, b, c).0
}

/// Squared distance from `p` to triangle `abc`. Interior projections use the
/// plane distance directly, so points on a face are at distance exactly 0.
pub fn triangle_distance_sq(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    match closest_feature(p, a, b, c) {
        (_, true) => {
            let n = (b - a).cross(&(c - a));
            let h = n.dot(&(p - a));
            h * h / n.norm_squared()
        }
        (q, false) => (q - p).norm_squared(),
    }
}

/// Closest point and whether it lies in the open interior region.
fn closest_feature(p: &Point, a: &Point, b: &Point, c: &Point) -> (Point, bool) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, false);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, false);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (a + ab * (d1 / (d1 - d3)), false);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, false);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (a + ac * (d2 / (d2 - d6)), false);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))), false);
    }
    let denom = 1.0 / (va + vb + vc);
    (a + ab * (vb * denom) + ac * (vc * denom), true)
}

/// Spatial index over triangle centroids. A triangle whose centroid is at
/// distance `D` from a query is at least `D - radius` away, where `radius` is
/// the largest centroid-to-vertex distance of any face.
pub(crate) struct MeshIndex<'a> {
    mesh: &'a TriangleMesh,
    centroids: NeighborIndex,
    radius: f64,
}

impl<'a> MeshIndex<'a> {
    pub(crate) fn new(mesh: &'a TriangleMesh) -> Self {
        let mut radius = 0.0f64;
        let centroids: Vec<Point> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let g = Point::from((a.coords + b.coords + c.coords) / 3.0);
                for v in [a, b, c] {
                    radius = radius.max((v - g).norm());
                }
                g
            })
            .collect();
        Self {
            mesh,
            centroids: NeighborIndex::new(&centroids),
            radius,
        }
    }

    /// Exact distance from `p` to the mesh surface.
    pub(crate) fn distance(&self, p: &Point) -> f64 {
        let faces = self.mesh.faces.len();
        let mut k = 8.min(faces);
        loop {
            let found = self.centroids.knn_sq(p, k);
            let best = found
                .iter()
                .map(|&(f, _)| {
                    let [a, b, c] = self.mesh.triangle(f);
                    triangle_distance_sq(p, &a, &b, &c)
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if k == faces {
                return best;
            }
            let horizon = found[k - 1].1.sqrt() - self.radius;
            if best <= horizon {
                return best;
            }
            k = (2 * k).min(faces);
        }
    }
}

/// Point-to-surface distance from every point of `cloud` to `mesh`, as
/// `(mean, max)`.
pub fn point_to_mesh(cloud: &PointCloud, mesh: &TriangleMesh) -> Result<(f64, f64)> {
    let dists = point_to_mesh_distances(cloud, mesh)?;
    let max = dists.iter().copied().fold(0.0, f64::max);
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    Ok((mean, max))
}

/// Per-point distances to the mesh surface, in cloud order.
pub fn point_to_mesh_distances(cloud: &PointCloud, mesh: &TriangleMesh) -> Result<Vec<f64>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let index = MeshIndex::new(mesh);
    Ok(cloud.points().par_iter().map(|p| index.distance(p)).collect())
}
