//! Object feature pairs able to realise two scene contacts, and the object
//! points `q`, `r` on them separated by the scene distance.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    closest_points_between_lines, mesh::tangent_frame, plane_plane_intersection, project_point_to_line,
    project_point_to_plane, rotation_between_vectors, Line, Plane, PolyMesh, Vec3, PARALLEL_TOL,
};

/// Angular slack for normal opposition and edge orthogonality (degrees).
pub const AFFORD_TOL_DEG: f64 = 1.0;

/// Points per edge normal arc when bounding the reachable angles.
const ARC_STEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("centre of mass lies on the apex of the construction")]
    DegenerateTriangle,
    #[error("features are too far apart for the requested separation")]
    TooFarApart,
    #[error("parallel faces that are not coplanar")]
    ParallelFaces,
}

/// Contact point sampled on the scene surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneContactSample {
    pub position: Vec3,
    /// Outward unit normal of the owning scene face.
    pub normal: Vec3,
    pub object: usize,
    pub face: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    FaceFaceCoplanar,
    FaceFaceIntersecting,
    FaceEdgeIntersecting,
    FaceEdgeParallel,
    EdgeEdgeParallel,
    EdgeEdgeIntersecting,
    EdgeEdgeSkew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Face(usize),
    Edge(usize),
}

impl Feature {
    /// Normal used to orient the object: the face normal, or the normalised
    /// mean of the two face normals of an edge.
    pub fn normal(&self, mesh: &PolyMesh) -> Vec3 {
        match *self {
            Feature::Face(f) => mesh.faces[f].normal,
            Feature::Edge(e) => {
                let ed = &mesh.edges[e];
                (ed.normals[0] + ed.normals[1]).normalize()
            }
        }
    }
}

/// Matched feature pair with its object points (object frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePair {
    pub kind: PairKind,
    pub first: Feature,
    pub second: Feature,
    pub q: Vec3,
    pub r: Vec3,
    pub length: f64,
}

/// Rotation taking `n_a` onto `n_b`.
pub fn relative_scene_rotation(n_a: &Vec3, n_b: &Vec3) -> Matrix3<f64> {
    rotation_between_vectors(n_a, n_b)
}

fn cos_tol() -> f64 {
    AFFORD_TOL_DEG.to_radians().cos()
}

/// Whether a face with outward normal `face_normal` can rest against a
/// surface whose outward normal is `required`.
pub fn face_affords_face(face_normal: &Vec3, required: &Vec3) -> bool {
    face_normal.dot(required) <= -cos_tol()
}

/// Whether an edge can present the outward normal `n`: `n` must be orthogonal
/// to the edge and pass the side-vector sign test in edge-aligned coordinates.
pub fn face_affords_edge(n: &Vec3, direction: &Vec3, s1: &Vec3, s2: &Vec3) -> bool {
    if direction.dot(n).abs() > AFFORD_TOL_DEG.to_radians().sin() {
        return false;
    }
    let u = direction.dot(&s1.cross(s2));
    let v = direction.dot(&n.cross(s2));
    let w = direction.dot(&n.cross(s1));
    u * v <= 0.0 && u * w >= 0.0
}

/// Outward normals an object feature can present to a supporting plane.
#[derive(Debug, Clone)]
struct NormalSet {
    feature: Feature,
    normals: Vec<Vec3>,
}

/// Per-object feature data reused across planning iterations.
#[derive(Debug, Clone)]
pub struct ObjectFeatures {
    sets: Vec<NormalSet>,
    /// Direction of largest spread of the vertices, per face.
    extent_axes: Vec<Vec3>,
}

fn slerp(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    let cos = a.dot(b).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return *a;
    }
    let s = angle.sin();
    (a * ((1.0 - t) * angle).sin() / s + b * (t * angle).sin() / s).normalize()
}

impl ObjectFeatures {
    pub fn new(mesh: &PolyMesh) -> Self {
        let mut sets = Vec::new();
        for (fi, f) in mesh.faces.iter().enumerate() {
            sets.push(NormalSet {
                feature: Feature::Face(fi),
                normals: vec![f.normal],
            });
        }
        for (ei, e) in mesh.edges.iter().enumerate() {
            if !e.convex {
                continue;
            }
            let (a, b) = (-e.sides[0], -e.sides[1]);
            let normals = (0..=ARC_STEPS)
                .map(|k| slerp(&a, &b, k as f64 / ARC_STEPS as f64))
                .collect();
            sets.push(NormalSet {
                feature: Feature::Edge(ei),
                normals,
            });
        }
        let extent_axes = mesh.faces.iter().map(|f| extent_axis(&mesh.vertices, &f.normal)).collect();
        Self { sets, extent_axes }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Principal axis of the vertices projected onto the plane with normal `n`.
/// Falls back to the tangent frame's first axis when the spread is isotropic.
pub fn extent_axis(vertices: &[Vec3], n: &Vec3) -> Vec3 {
    let (tu, tv) = tangent_frame(n);
    if vertices.is_empty() {
        return tu;
    }
    let pts: Vec<(f64, f64)> = vertices.iter().map(|p| (p.dot(&tu), p.dot(&tv))).collect();
    let k = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k));
    let mut cov: Matrix2<f64> = Matrix2::zeros();
    for (x, y) in &pts {
        let (dx, dy) = (x - mx, y - my);
        cov[(0, 0)] += dx * dx;
        cov[(0, 1)] += dx * dy;
        cov[(1, 1)] += dy * dy;
    }
    cov[(1, 0)] = cov[(0, 1)];
    let eig = SymmetricEigen::new(cov);
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let spread = eig.eigenvalues[hi].abs().max(1e-300);
    if (eig.eigenvalues[hi] - eig.eigenvalues[lo]) / spread < 1e-9 {
        return tu;
    }
    let ev = eig.eigenvectors.column(hi);
    let axis = tu * ev[0] + tv * ev[1];
    // deterministic sign
    if axis.dot(&tu) < -1e-12 || (axis.dot(&tu).abs() <= 1e-12 && axis.dot(&tv) < 0.0) {
        -axis.normalize()
    } else {
        axis.normalize()
    }
}

fn dot_range(a: &[Vec3], b: &[Vec3]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in a {
        for y in b {
            let d = x.dot(y);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

fn angle_compatible(a: &[Vec3], b: &[Vec3], c: f64) -> bool {
    let target = c.clamp(-1.0, 1.0).acos();
    let tol = AFFORD_TOL_DEG.to_radians();
    let (lo, hi) = dot_range(a, b);
    let (amin, amax) = (hi.clamp(-1.0, 1.0).acos(), lo.clamp(-1.0, 1.0).acos());
    target >= amin - tol && target <= amax + tol
}

fn face_plane(mesh: &PolyMesh, f: usize) -> Plane {
    Plane::new(mesh.faces[f].normal, mesh.faces[f].offset)
}

fn edge_line(mesh: &PolyMesh, e: usize) -> Line {
    Line::new(mesh.edges[e].origin, mesh.edges[e].direction)
}

fn faces_coplanar(p1: &Plane, p2: &Plane, tol: f64) -> Option<bool> {
    if p1.normal.cross(&p2.normal).norm() > PARALLEL_TOL {
        return None;
    }
    Some(p1.normal.dot(&p2.normal) > 0.0 && (p1.offset - p2.offset).abs() <= tol)
}

/// Ordered feature pairs whose normals can oppose the two scene normals at
/// once. Since the object may take any orientation, this reduces to the angle
/// between the presented normals matching the angle between the scene normals.
/// Parallel faces that are not coplanar are dropped.
pub fn enumerate_feature_pairs(
    mesh: &PolyMesh,
    features: &ObjectFeatures,
    a: &SceneContactSample,
    b: &SceneContactSample,
) -> Vec<(Feature, Feature)> {
    let c = a.normal.dot(&b.normal);
    let mut out = Vec::new();
    for s1 in &features.sets {
        for s2 in &features.sets {
            if let (Feature::Edge(e1), Feature::Edge(e2)) = (s1.feature, s2.feature) {
                if e1 == e2 {
                    continue;
                }
            }
            if !angle_compatible(&s1.normals, &s2.normals, c) {
                continue;
            }
            if let (Feature::Face(f1), Feature::Face(f2)) = (s1.feature, s2.feature) {
                if f1 != f2 && faces_coplanar(&face_plane(mesh, f1), &face_plane(mesh, f2), 1e-9) == Some(false) {
                    continue;
                }
            }
            out.push((s1.feature, s2.feature));
        }
    }
    out
}

/// Uniformly chosen valid pair, if any.
pub fn choose_feature_pair<R: Rng + ?Sized>(pairs: &[(Feature, Feature)], rng: &mut R) -> Option<(Feature, Feature)> {
    pairs.choose(rng).copied()
}

/// Points along `axis` at ±L/2 from the projection of `com` onto the plane.
pub fn match_face_face_coplanar(plane: &Plane, axis: &Vec3, com: &Vec3, length: f64) -> (Vec3, Vec3) {
    let o1 = project_point_to_plane(com, plane);
    let u = (axis - plane.normal * axis.dot(&plane.normal)).normalize();
    (o1 + u * (0.5 * length), o1 - u * (0.5 * length))
}

/// Similar-triangle construction from apex `o0` through `o1` and `o2`.
fn triangle(o0: &Vec3, o1: &Vec3, o2: &Vec3, length: f64) -> Result<(Vec3, Vec3), MatchError> {
    let base = (o1 - o2).norm();
    if base <= 1e-12 {
        return Err(MatchError::DegenerateTriangle);
    }
    let k = length / base;
    Ok((o0 + (o1 - o0) * k, o0 + (o2 - o0) * k))
}

pub fn match_face_face_intersecting(p1: &Plane, p2: &Plane, com: &Vec3, length: f64) -> Result<(Vec3, Vec3), MatchError> {
    let line = plane_plane_intersection(p1, p2).map_err(|_| MatchError::ParallelFaces)?;
    let o0 = project_point_to_line(com, &line);
    let o1 = project_point_to_plane(com, p1);
    let o2 = project_point_to_plane(com, p2);
    triangle(&o0, &o1, &o2, length)
}

/// Face point `q` and edge point `r`.
pub fn match_face_edge(plane: &Plane, edge: &Line, com: &Vec3, length: f64) -> Result<(PairKind, Vec3, Vec3), MatchError> {
    let o1 = project_point_to_plane(com, plane);
    let o2 = project_point_to_line(com, edge);
    let denom = plane.normal.dot(&edge.direction);
    if denom.abs() > PARALLEL_TOL {
        let t = (plane.offset - plane.normal.dot(&edge.origin)) / denom;
        let o0 = edge.at(t);
        let (q, r) = triangle(&o0, &o1, &o2, length)?;
        return Ok((PairKind::FaceEdgeIntersecting, q, r));
    }
    let o3 = project_point_to_plane(&o2, plane);
    let h2 = (o3 - o2).norm_squared();
    let slack = length * length - h2;
    if slack < -1e-12 * length.max(1.0).powi(2) {
        return Err(MatchError::TooFarApart);
    }
    let mut dir = o1 - o3;
    if dir.norm() <= 1e-12 {
        dir = edge.direction - plane.normal * edge.direction.dot(&plane.normal);
    }
    let q = o3 + dir.normalize() * slack.max(0.0).sqrt();
    Ok((PairKind::FaceEdgeParallel, q, o2))
}

pub fn match_edge_edge(e1: &Line, e2: &Line, com: &Vec3, length: f64) -> Result<(PairKind, Vec3, Vec3), MatchError> {
    let o1 = project_point_to_line(com, e1);
    let o2 = project_point_to_line(com, e2);
    let Ok((t1, t2)) = closest_points_between_lines(e1, e2) else {
        let gap2 = (o1 - o2).norm_squared();
        if length * length < gap2 {
            return Ok((PairKind::EdgeEdgeParallel, o1, o2));
        }
        let half = 0.5 * (length * length - gap2).sqrt();
        return Ok((PairKind::EdgeEdgeParallel, o1 + e1.direction * half, o2 - e1.direction * half));
    };
    let p1 = e1.at(t1);
    let p2 = e2.at(t2);
    let gap = (p1 - p2).norm();
    if gap <= 1e-9 {
        let (q, r) = triangle(&p1, &o1, &o2, length)?;
        return Ok((PairKind::EdgeEdgeIntersecting, q, r));
    }
    let slack = length * length - gap * gap;
    if slack < -1e-12 * length.max(1.0).powi(2) {
        return Err(MatchError::TooFarApart);
    }
    let planar = slack.max(0.0).sqrt();
    let spread2 = (o1 - o2).norm_squared() - gap * gap;
    if planar == 0.0 {
        return Ok((PairKind::EdgeEdgeSkew, p1, p2));
    }
    if spread2 <= 1e-18 {
        // both projections at the closest points: slide along the first edge
        return Ok((PairKind::EdgeEdgeSkew, p1 + e1.direction * planar, p2));
    }
    let k = planar / spread2.sqrt();
    Ok((PairKind::EdgeEdgeSkew, p1 + (o1 - p1) * k, p2 + (o2 - p2) * k))
}

/// Object points for a chosen feature pair (object frame).
pub fn match_features(
    mesh: &PolyMesh,
    features: &ObjectFeatures,
    first: Feature,
    second: Feature,
    com: &Vec3,
    length: f64,
) -> Result<FeaturePair, MatchError> {
    let (kind, q, r) = match (first, second) {
        (Feature::Face(f1), Feature::Face(f2)) => {
            let p1 = face_plane(mesh, f1);
            let p2 = face_plane(mesh, f2);
            match faces_coplanar(&p1, &p2, 1e-9) {
                Some(true) => {
                    let (q, r) = match_face_face_coplanar(&p1, &features.extent_axes[f1], com, length);
                    (PairKind::FaceFaceCoplanar, q, r)
                }
                Some(false) => return Err(MatchError::ParallelFaces),
                None => {
                    let (q, r) = match_face_face_intersecting(&p1, &p2, com, length)?;
                    (PairKind::FaceFaceIntersecting, q, r)
                }
            }
        }
        (Feature::Face(f), Feature::Edge(e)) => match_face_edge(&face_plane(mesh, f), &edge_line(mesh, e), com, length)?,
        (Feature::Edge(e), Feature::Face(f)) => {
            let (kind, q, r) = match_face_edge(&face_plane(mesh, f), &edge_line(mesh, e), com, length)?;
            (kind, r, q)
        }
        (Feature::Edge(e1), Feature::Edge(e2)) => match_edge_edge(&edge_line(mesh, e1), &edge_line(mesh, e2), com, length)?,
    };
    Ok(FeaturePair {
        kind,
        first,
        second,
        q,
        r,
        length,
    })
}
