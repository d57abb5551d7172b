use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metrics::TriangleMesh;
use crate::pointcloud::{Point, PointCloud, Vector};
use crate::rng::{seeded_rng, stream_key};

/// Subdivision level of the sphere mesh (20·4⁵ = 20480 faces).
pub const SPHERE_MESH_LEVEL: usize = 5;
pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.35;
const TORUS_SEGMENTS: (usize, usize) = (192, 72);
/// Slope of each half of the creased plane `z = CREASE_SLOPE · |x|`.
pub const CREASE_SLOPE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Unit sphere at the origin.
    Sphere,
    /// Ring torus around the z axis.
    Torus,
    /// Two planar halves meeting along the y axis, over `[-1, 1]²`.
    Crease,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Sphere, Shape::Torus, Shape::Crease];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Torus => "torus",
            Shape::Crease => "crease",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Shape::Sphere),
            "torus" => Ok(Shape::Torus),
            "crease" | "plane-with-crease" => Ok(Shape::Crease),
            _ => Err(Error::invalid(format!(
                "unknown shape `{s}` (expected sphere, torus or crease)"
            ))),
        }
    }
}

/// Area-uniform samples of `shape` with optional isotropic Gaussian noise of
/// standard deviation `sigma` (absolute units), plus the shape's mesh.
pub fn generate_synthetic(
    shape: Shape,
    n: usize,
    seed: u64,
    sigma: f64,
) -> Result<(PointCloud, TriangleMesh)> {
    if n < 4 {
        return Err(Error::invalid(format!("need at least 4 points, got {n}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise must be non-negative, got {sigma}")));
    }
    let mut rng = seeded_rng(stream_key(seed, shape.name(), 0));
    let mut points: Vec<Point> = (0..n)
        .map(|_| match shape {
            Shape::Sphere => sample_sphere(&mut rng),
            Shape::Torus => sample_torus(&mut rng),
            Shape::Crease => sample_crease(&mut rng),
        })
        .collect();
    if sigma > 0.0 {
        let mut noise = seeded_rng(stream_key(seed, "noise", 0));
        for p in &mut points {
            let g: [f64; 3] = std::array::from_fn(|_| noise.sample(StandardNormal));
            *p += Vector::from(g) * sigma;
        }
    }
    let mesh = match shape {
        Shape::Sphere => icosphere(SPHERE_MESH_LEVEL),
        Shape::Torus => torus_mesh(TORUS_SEGMENTS.0, TORUS_SEGMENTS.1),
        Shape::Crease => crease_mesh(),
    }?;
    Ok((PointCloud::new(points)?, mesh))
}

fn sample_sphere(rng: &mut impl Rng) -> Point {
    loop {
        let g = Vector::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let len = g.norm();
        if len > 1e-12 {
            return Point::from(g / len);
        }
    }
}

/// Rejection sampling on the angle of the tube: the area element is
/// proportional to `R + r cos φ`.
fn sample_torus(rng: &mut impl Rng) -> Point {
    loop {
        let theta = rng.random::<f64>() * TAU;
        let phi = rng.random::<f64>() * TAU;
        let accept = (TORUS_MAJOR + TORUS_MINOR * phi.cos()) / (TORUS_MAJOR + TORUS_MINOR);
        if rng.random::<f64>() < accept {
            return torus_point(theta, phi);
        }
    }
}

fn torus_point(theta: f64, phi: f64) -> Point {
    let ring = TORUS_MAJOR + TORUS_MINOR * phi.cos();
    Point::new(ring * theta.cos(), ring * theta.sin(), TORUS_MINOR * phi.sin())
}

fn sample_crease(rng: &mut impl Rng) -> Point {
    let x: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let y: f64 = rng.random::<f64>() * 2.0 - 1.0;
    Point::new(x, y, CREASE_SLOPE * x.abs())
}

/// Icosahedron subdivided `level` times with vertices pushed onto the unit
/// sphere.
pub fn icosphere(level: usize) -> Result<TriangleMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Point::from(Vector::from(*v).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a].coords + vertices[b].coords).normalize();
                vertices.push(Point::from(m));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces)
}

fn torus_mesh(around: usize, tube: usize) -> Result<TriangleMesh> {
    let vertices = (0..around)
        .flat_map(|i| {
            (0..tube).map(move |j| {
                torus_point(TAU * i as f64 / around as f64, TAU * j as f64 / tube as f64)
            })
        })
        .collect();
    let id = |i: usize, j: usize| (i % around) * tube + (j % tube);
    let faces = (0..around)
        .flat_map(|i| {
            (0..tube).flat_map(move |j| {
                [
                    [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                    [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                ]
            })
        })
        .collect();
    TriangleMesh::new(vertices, faces)
}

fn crease_mesh() -> Result<TriangleMesh> {
    let v = |x: f64, y: f64| Point::new(x, y, CREASE_SLOPE * x.abs());
    let vertices = vec![v(-1.0, -1.0), v(-1.0, 1.0), v(0.0, -1.0), v(0.0, 1.0), v(1.0, -1.0), v(1.0, 1.0)];
    TriangleMesh::new(vertices, vec![[0, 2, 3], [0, 3, 1], [2, 4, 5], [2, 5, 3]])
}

/// Surface area of the ideal shape (not its mesh).
pub fn ideal_area(shape: Shape) -> f64 {
    match shape {
        Shape::Sphere => 4.0 * PI,
        Shape::Torus => 4.0 * PI * PI * TORUS_MAJOR * TORUS_MINOR,
        Shape::Crease => 4.0 * (1.0 + CREASE_SLOPE * CREASE_SLOPE).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::point_to_mesh;

    #[test]
    fn sphere_points_on_surface() {
        let (cloud, mesh) = generate_synthetic(Shape::Sphere, 500, 1, 0.0).unwrap();
        assert_eq!(cloud.len(), 500);
        assert!(cloud.points().iter().all(|p| (p.coords.norm() - 1.0).abs() < 1e-6));
        assert_eq!(mesh.faces().len(), 20 * 4usize.pow(SPHERE_MESH_LEVEL as u32));
    }

    #[test]
    fn crease_is_exact() {
        let (cloud, mesh) = generate_synthetic(Shape::Crease, 400, 2, 0.0).unwrap();
        let (mean, max) = point_to_mesh(&cloud, &mesh).unwrap();
        assert!(mean < 1e-6 && max < 1e-6);
        assert!((mesh.surface_area() - ideal_area(Shape::Crease)).abs() < 1e-12);
    }

    #[test]
    fn curved_meshes_are_close() {
        for shape in [Shape::Sphere, Shape::Torus] {
            let (cloud, mesh) = generate_synthetic(shape, 300, 3, 0.0).unwrap();
            let (_, max) = point_to_mesh(&cloud, &mesh).unwrap();
            assert!(max < 1e-3, "{shape}: {max}");
            let rel = (mesh.surface_area() - ideal_area(shape)).abs() / ideal_area(shape);
            assert!(rel < 2e-3, "{shape}: {rel}");
        }
    }

    #[test]
    fn torus_count_and_area_uniformity() {
        let (cloud, _) = generate_synthetic(Shape::Torus, 20_000, 4, 0.0).unwrap();
        assert_eq!(cloud.len(), 20_000);
        // Outer half of the tube (cos φ > 0) carries area fraction 1/2 + r/(πR).
        let outer = cloud
            .points()
            .iter()
            .filter(|p| (p.x * p.x + p.y * p.y).sqrt() > TORUS_MAJOR)
            .count() as f64
            / 20_000.0;
        let expected = 0.5 + TORUS_MINOR / (PI * TORUS_MAJOR);
        assert!((outer - expected).abs() < 0.015, "{outer} vs {expected}");
    }

    #[test]
    fn noise_and_determinism() {
        let (a, _) = generate_synthetic(Shape::Sphere, 100, 9, 0.01).unwrap();
        let (b, _) = generate_synthetic(Shape::Sphere, 100, 9, 0.01).unwrap();
        assert_eq!(a, b);
        let off = a.points().iter().map(|p| (p.coords.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(off > 1e-3);
        assert!(generate_synthetic(Shape::Sphere, 3, 0, 0.0).is_err());
    }

    #[test]
    fn shape_names() {
        for s in Shape::ALL {
            assert_eq!(s.name().parse::<Shape>().unwrap(), s);
        }
        assert_eq!("plane-with-crease".parse::<Shape>().unwrap(), Shape::Crease);
    }
}
