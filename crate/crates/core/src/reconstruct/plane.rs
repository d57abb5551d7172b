use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};

use crate::pointcloud::{Point, Vector};

/// Relative eigenvalue floor below which a neighborhood counts as rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// A least-squares plane with an orthonormal in-plane basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub origin: Point,
    pub normal: Vector,
    pub axis_u: Vector,
    pub axis_v: Vector,
}

impl Plane {
    pub fn signed_distance(&self, p: &Point) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    pub fn project(&self, p: &Point) -> Point {
        p - self.normal * self.signed_distance(p)
    }
}

/// Flips `v` so its largest-magnitude component is positive.
fn canonical_sign(v: Vector) -> Vector {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}

/// Fits a plane to `points` with optional non-negative weights. Returns
/// `None` when fewer than three points carry weight or the spread is
/// (numerically) confined to a line.
pub fn fit_plane(points: &[Point], weights: Option<&[f64]>) -> Option<Plane> {
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut wsum = 0.0;
    let mut acc = Vector::zeros();
    let mut active = 0;
    for (i, p) in points.iter().enumerate() {
        let w = weight(i);
        if w > 0.0 {
            active += 1;
        }
        wsum += w;
        acc += p.coords * w;
    }
    if active < 3 || !(wsum > 0.0) {
        return None;
    }
    let origin = Point::from(acc / wsum);
    let mut cov = Matrix3::zeros();
    for (i, p) in points.iter().enumerate() {
        let d = p - origin;
        cov += d * d.transpose() * weight(i);
    }
    cov /= wsum;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (small, mid, large) = (order[0], order[1], order[2]);
    let lmax = eig.eigenvalues[large];
    if !(lmax > 0.0) || eig.eigenvalues[mid] <= RANK_TOL * lmax {
        return None;
    }
    let normal = canonical_sign(eig.eigenvectors.column(small).into_owned().normalize());
    let axis_u = canonical_sign(eig.eigenvectors.column(large).into_owned());
    // Re-orthogonalize against the normal before completing the frame.
    let axis_u = (axis_u - normal * axis_u.dot(&normal)).normalize();
    let axis_v = normal.cross(&axis_u);
    Some(Plane {
        origin,
        normal,
        axis_u,
        axis_v,
    })
}

/// A height field `w = c₀ + c₁u + c₂v + c₃u² + c₄uv + c₅v²` over a plane's
/// `(axis_u, axis_v)` frame, with `u, v` measured in units of `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadric {
    pub plane: Plane,
    pub scale: f64,
    pub coeffs: [f64; 6],
}

impl Quadric {
    fn basis(u: f64, v: f64) -> SVector<f64, 6> {
        SVector::from([1.0, u, v, u * u, u * v, v * v])
    }

    /// Moves `p` along the plane normal onto the height field.
    pub fn project(&self, p: &Point) -> Point {
        let d = p - self.plane.origin;
        let (u, v) = (d.dot(&self.plane.axis_u), d.dot(&self.plane.axis_v));
        let h = Self::basis(u / self.scale, v / self.scale).dot(&SVector::from(self.coeffs));
        self.plane.origin + self.plane.axis_u * u + self.plane.axis_v * v + self.plane.normal * h
    }
}

/// Weighted least-squares height field over `plane`. Returns `None` when
/// fewer than six points carry weight or the normal equations are singular.
pub fn fit_quadric(plane: &Plane, points: &[Point], weights: &[f64], scale: f64) -> Option<Quadric> {
    if !(scale > 0.0) || weights.iter().filter(|w| **w > 0.0).count() < 6 {
        return None;
    }
    let mut ata = SMatrix::<f64, 6, 6>::zeros();
    let mut atb = SVector::<f64, 6>::zeros();
    for (p, &w) in points.iter().zip(weights) {
        let d = p - plane.origin;
        let b = Quadric::basis(d.dot(&plane.axis_u) / scale, d.dot(&plane.axis_v) / scale);
        ata += b * b.transpose() * w;
        atb += b * (d.dot(&plane.normal) * w);
    }
    let trace = ata.trace();
    // Reject nearly singular systems (e.g. neighbors on a line in the plane).
    let eig = ata.symmetric_eigenvalues();
    if !(trace > 0.0) || eig.min() <= 1e-10 * trace {
        return None;
    }
    let coeffs = ata.cholesky()?.solve(&atb);
    Some(Quadric {
        plane: *plane,
        scale,
        coeffs: coeffs.into(),
    })
}
