//! Geometric kernel: planes, lines, rigid poses, projections and intersections.
//!
//! Points and vectors are both represented as [`Vec3`]. All operations are
//! pure functions over immutable inputs.

pub mod hull;
pub mod mesh;
pub mod primitives;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hull::{quickhull, ConvexHull};
pub use mesh::{extract_features, Edge, Face, PolyMesh};

pub type Vec3 = Vector3<f64>;

/// Sine of the angle below which two directions are treated as parallel.
pub const PARALLEL_TOL: f64 = 1e-8;

/// Maximum plane residual (m) for two triangles to be merged into one face.
pub const MERGE_PLANE_TOL: f64 = 1e-6;

/// Maximum normal deviation (degrees) for two triangles to be merged into one face.
pub const MERGE_ANGLE_DEG: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate hull: {0}")]
    DegenerateHull(&'static str),
    #[error("lines are parallel")]
    ParallelLines,
    #[error("planes are parallel")]
    ParallelPlanes,
    #[error("line does not intersect the plane")]
    NoIntersection,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    /// Builds the plane `normal · p = offset`; `normal` is normalized.
    pub fn new(normal: Vec3, offset: f64) -> Self {
        let len = normal.norm();
        Self {
            normal: normal / len,
            offset: offset / len,
        }
    }

    pub fn through(point: &Vec3, normal: &Vec3) -> Self {
        let n = normal.normalize();
        Self {
            normal: n,
            offset: n.dot(point),
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Line {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Rigid transform mapping object-frame coordinates into the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Quaternion given as `[w, x, y, z]`; it must already be unit length.
    pub fn from_quaternion(wxyz: [f64; 4], translation: Vec3) -> Self {
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let uq = UnitQuaternion::new_unchecked(q);
        Self::new(uq.to_rotation_matrix().into_inner(), translation)
    }

    pub fn quaternion(&self) -> [f64; 4] {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        [q.w, q.i, q.j, q.k]
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// Orthonormality and handedness residual: max(‖RᵀR − I‖∞, |det R − 1|).
    pub fn rotation_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        e.max((self.rotation.determinant() - 1.0).abs())
    }
}

/// Cross-product matrix: `skew(u) * v == u × v`.
pub fn skew(u: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Any unit vector orthogonal to `v`.
pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&a).normalize()
}

/// Parameters `(t1, t2)` of the mutually closest points `e1(t1)`, `e2(t2)`.
pub fn closest_points_between_lines(e1: &Line, e2: &Line) -> Result<(f64, f64), GeometryError> {
    let b = e1.direction.dot(&e2.direction);
    let denom = 1.0 - b * b;
    if e1.direction.cross(&e2.direction).norm() <= PARALLEL_TOL || denom <= 0.0 {
        return Err(GeometryError::ParallelLines);
    }
    let r = e1.origin - e2.origin;
    let c = e1.direction.dot(&r);
    let f = e2.direction.dot(&r);
    let t1 = (b * f - c) / denom;
    let t2 = (f - b * c) / denom;
    Ok((t1, t2))
}

pub fn project_point_to_plane(p: &Vec3, plane: &Plane) -> Vec3 {
    let n = &plane.normal;
    n * plane.offset + p - n * p.dot(n)
}

pub fn project_point_to_line(p: &Vec3, line: &Line) -> Vec3 {
    let u = &line.direction;
    line.origin + u * (p - line.origin).dot(u)
}

pub fn plane_plane_intersection(p1: &Plane, p2: &Plane) -> Result<Line, GeometryError> {
    let u = p1.normal.cross(&p2.normal);
    let s = u.norm();
    if s <= PARALLEL_TOL {
        return Err(GeometryError::ParallelPlanes);
    }
    let origin = (p2.normal.cross(&u) * p1.offset + u.cross(&p1.normal) * p2.offset) / (s * s);
    Ok(Line {
        origin,
        direction: u / s,
    })
}

pub fn line_plane_intersection(line: &Line, plane: &Plane) -> Result<(f64, Vec3), GeometryError> {
    let denom = plane.normal.dot(&line.direction);
    if denom.abs() <= PARALLEL_TOL {
        return Err(GeometryError::NoIntersection);
    }
    let t = (plane.offset - plane.normal.dot(&line.origin)) / denom;
    Ok((t, line.at(t)))
}

/// Rotation taking unit vector `a` onto unit vector `b` (Rodrigues form).
///
/// For antipodal inputs the axis is undefined; the convention is a half-turn
/// about [`any_orthogonal`]`(a)`.
pub fn rotation_between_vectors(a: &Vec3, b: &Vec3) -> Matrix3<f64> {
    let axis = a.cross(b);
    let sin = axis.norm();
    let cos = a.dot(b);
    if sin < 1e-12 {
        if cos > 0.0 {
            return Matrix3::identity();
        }
        let k = any_orthogonal(a);
        return k * k.transpose() * 2.0 - Matrix3::identity();
    }
    let k = skew(&(axis / sin));
    Matrix3::identity() + k * sin + k * k * (1.0 - cos)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut bb = Self::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflated(&self, by: f64) -> Aabb {
        Aabb {
            min: self.min.add_scalar(-by),
            max: self.max.add_scalar(by),
        }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn orthogonal_skew_lines() {
        let e1 = Line::new(Vec3::zeros(), Vec3::x());
        let e2 = Line::new(Vec3::new(0.0, 0.0, 1.0), Vec3::y());
        let (t1, t2) = closest_points_between_lines(&e1, &e2).unwrap();
        assert!(t1.abs() < 1e-12 && t2.abs() < 1e-12);
        assert!(((e1.at(t1) - e2.at(t2)).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intersecting_lines_meet() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let e1 = Line::new(p - Vec3::new(1.0, 1.0, 0.0) * 2.0, Vec3::new(1.0, 1.0, 0.0));
        let e2 = Line::new(p + Vec3::new(0.0, -1.0, 2.0) * 3.0, Vec3::new(0.0, -1.0, 2.0));
        let (t1, t2) = closest_points_between_lines(&e1, &e2).unwrap();
        assert!((e1.at(t1) - p).norm() < 1e-9);
        assert!((e2.at(t2) - p).norm() < 1e-9);
    }

    #[test]
    fn parallel_lines_rejected() {
        let e1 = Line::new(Vec3::zeros(), Vec3::x());
        let e2 = Line::new(Vec3::y(), -Vec3::x());
        assert_eq!(
            closest_points_between_lines(&e1, &e2),
            Err(GeometryError::ParallelLines)
        );
    }

    #[test]
    fn closest_points_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let e1 = Line::new(
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3),
                random_unit(&mut rng),
            );
            let e2 = Line::new(
                Vec3::new(0.2, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                random_unit(&mut rng),
            );
            let (t1, t2) = closest_points_between_lines(&e1, &e2).unwrap();
            // coarse grid followed by shrinking-window refinement
            let dist = |a: f64, b: f64| (e1.at(a) - e2.at(b)).norm();
            let (mut best_a, mut best_b, mut best) = (0.0, 0.0, f64::INFINITY);
            let mut i = -200;
            while i <= 200 {
                let mut j = -200;
                while j <= 200 {
                    let (a, b) = (i as f64 * 0.05, j as f64 * 0.05);
                    let d = dist(a, b);
                    if d < best {
                        (best_a, best_b, best) = (a, b, d);
                    }
                    j += 1;
                }
                i += 1;
            }
            let mut h = 0.05;
            for _ in 0..60 {
                for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h), (h, -h), (-h, h)] {
                    let d = dist(best_a + da, best_b + db);
                    if d < best {
                        (best_a, best_b, best) = (best_a + da, best_b + db, d);
                    }
                }
                h *= 0.7;
            }
            assert!((dist(t1, t2) - best).abs() < 1e-8, "{} vs {}", dist(t1, t2), best);
            let gap = e1.at(t1) - e2.at(t2);
            assert!(gap.dot(&e1.direction).abs() < 1e-9);
            assert!(gap.dot(&e2.direction).abs() < 1e-9);
            for (da, db) in [(1e-4, 0.0), (-1e-4, 0.0), (0.0, 1e-4), (0.0, -1e-4)] {
                assert!(dist(t1 + da, t2 + db) >= dist(t1, t2));
            }
        }
    }

    #[test]
    fn plane_projection_cases() {
        let z0 = Plane::new(Vec3::z(), 0.0);
        assert_eq!(
            project_point_to_plane(&Vec3::new(1.0, 1.0, 5.0), &z0),
            Vec3::new(1.0, 1.0, 0.0)
        );
        let on = Vec3::new(3.0, -2.0, 0.0);
        assert!((project_point_to_plane(&on, &z0) - on).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let plane = Plane::new(random_unit(&mut rng), rng.random_range(-2.0..2.0));
            let p = random_unit(&mut rng) * 3.0;
            let out = project_point_to_plane(&p, &plane);
            assert!(plane.signed_distance(&out).abs() < 1e-12);
            assert!((out - p).cross(&plane.normal).norm() < 1e-12);
            assert!((project_point_to_plane(&out, &plane) - out).norm() < 1e-12);
        }
    }

    #[test]
    fn line_projection_cases() {
        let x_axis = Line::new(Vec3::zeros(), Vec3::x());
        assert_eq!(
            project_point_to_line(&Vec3::new(2.0, 3.0, 4.0), &x_axis),
            Vec3::new(2.0, 0.0, 0.0)
        );
        let on = Vec3::new(-1.5, 0.0, 0.0);
        assert_eq!(project_point_to_line(&on, &x_axis), on);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let line = Line::new(random_unit(&mut rng), random_unit(&mut rng));
            let p = random_unit(&mut rng) * 2.0;
            let out = project_point_to_line(&p, &line);
            assert!((out - p).dot(&line.direction).abs() < 1e-12);
            assert!((out - line.origin).cross(&line.direction).norm() < 1e-12);
            assert!((project_point_to_line(&out, &line) - out).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_plane_cases() {
        let z0 = Plane::new(Vec3::z(), 0.0);
        let x0 = Plane::new(Vec3::x(), 0.0);
        let l = plane_plane_intersection(&z0, &x0).unwrap();
        assert!(l.direction.cross(&Vec3::y()).norm() < 1e-15);
        let a = Plane::new(Vec3::new(1.0, 0.0, 1.0), 0.7);
        let b = Plane::new(Vec3::new(-1.0, 0.0, 1.0), -0.2);
        let l = plane_plane_intersection(&a, &b).unwrap();
        for p in [l.origin, l.origin + l.direction] {
            assert!(a.signed_distance(&p).abs() < 1e-9);
            assert!(b.signed_distance(&p).abs() < 1e-9);
        }
        let c = Plane::new(Vec3::z(), 1.0);
        assert_eq!(
            plane_plane_intersection(&z0, &c),
            Err(GeometryError::ParallelPlanes)
        );
    }

    #[test]
    fn line_plane_cases() {
        let z0 = Plane::new(Vec3::z(), 0.0);
        let vertical = Line::new(Vec3::new(1.0, 2.0, 3.0), Vec3::z());
        let (t, p) = line_plane_intersection(&vertical, &z0).unwrap();
        assert!((t + 3.0).abs() < 1e-15);
        assert!(p.z.abs() < 1e-15);
        let inplane = Line::new(Vec3::zeros(), Vec3::x());
        assert_eq!(
            line_plane_intersection(&inplane, &z0),
            Err(GeometryError::NoIntersection)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let plane = Plane::new(random_unit(&mut rng), rng.random_range(-1.0..1.0));
            let line = Line::new(random_unit(&mut rng), random_unit(&mut rng));
            if let Ok((t, p)) = line_plane_intersection(&line, &plane) {
                assert!(plane.signed_distance(&p).abs() < 1e-9);
                assert!((line.at(t) - p).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_between_vectors_cases() {
        let r = rotation_between_vectors(&Vec3::x(), &Vec3::y());
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expected).abs().max() < 1e-12);
        assert_eq!(rotation_between_vectors(&Vec3::z(), &Vec3::z()), Matrix3::identity());
        let anti = rotation_between_vectors(&Vec3::z(), &-Vec3::z());
        assert!((anti * Vec3::z() + Vec3::z()).norm() < 1e-12);
        assert!(Pose::new(anti, Vec3::zeros()).rotation_error() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let r = rotation_between_vectors(&a, &b);
            assert!((r * a - b).norm() < 1e-9);
            assert!(Pose::new(r, Vec3::zeros()).rotation_error() < 1e-9);
        }
    }

    #[test]
    fn pose_inverse_and_quaternion() {
        let r = rotation_between_vectors(&Vec3::new(1.0, 2.0, 3.0).normalize(), &Vec3::y());
        let pose = Pose::new(r, Vec3::new(0.5, -1.0, 2.0));
        let p = Vec3::new(0.1, 0.2, 0.3);
        let back = pose.inverse().transform_point(&pose.transform_point(&p));
        assert!((back - p).norm() < 1e-12);
        let q = pose.quaternion();
        let again = Pose::from_quaternion(q, pose.translation);
        assert!((again.rotation - pose.rotation).abs().max() < 1e-12);
    }
}
