//! Contact interfaces between two touching polyhedra.

use crate::assembly::PlacedObject;
use crate::geometry::mesh::tangent_frame;
use crate::geometry::{PolyMesh, Vec3};
use crate::statics::ContactPoint;

/// Cosine threshold for two face normals to count as opposed.
const OPPOSED_COS: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InterfaceKind {
    FaceFace,
    FaceEdge,
    FaceVertex,
    EdgeEdge,
}

#[derive(Debug, Clone)]
pub struct ContactInterface {
    pub supporting: usize,
    pub supported: usize,
    /// Unit normal from the supporting into the supported object.
    pub normal: Vec3,
    pub kind: InterfaceKind,
    /// Corner points of the contact region.
    pub points: Vec<Vec3>,
    pub mu: f64,
    /// For face–face contacts: `(face on supporting, face on supported)`.
    pub faces: Option<(usize, usize)>,
    /// For face–face contacts: convex pieces of the shared region.
    pub polygons: Vec<Vec<Vec3>>,
}

impl ContactInterface {
    pub fn contact_points(&self) -> Vec<ContactPoint> {
        self.points
            .iter()
            .map(|p| ContactPoint::new(*p, self.normal, self.mu, self.supporting, self.supported))
            .collect()
    }

    /// Whether `p` (on the plane of the interface) lies inside the shared
    /// face–face region.
    pub fn region_contains(&self, p: &Vec3) -> bool {
        let (u, v) = tangent_frame(&self.normal);
        let q = (p.dot(&u), p.dot(&v));
        self.polygons.iter().any(|poly| {
            let pts: Vec<(f64, f64)> = poly.iter().map(|c| (c.dot(&u), c.dot(&v))).collect();
            inside_convex(&pts, q, 1e-9)
        })
    }
}

fn cross2(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn inside_convex(poly: &[(f64, f64)], q: (f64, f64), margin: f64) -> bool {
    let n = poly.len();
    (0..n).all(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        cross2(a, b, q) >= -margin * len
    })
}

/// Sutherland–Hodgman clip of `subject` by the convex counter-clockwise `clip`.
pub fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = subject.to_vec();
    for k in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[k], clip[(k + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let dc = cross2(a, b, cur);
            let dp = cross2(a, b, prev);
            if dc >= 0.0 {
                if dp < 0.0 {
                    out.push(lerp2(prev, cur, dp / (dp - dc)));
                }
                out.push(cur);
            } else if dp >= 0.0 {
                out.push(lerp2(prev, cur, dp / (dp - dc)));
            }
        }
    }
    out
}

fn lerp2(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

fn polygon_area(p: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for k in 0..p.len() {
        let (a, b) = (p[k], p[(k + 1) % p.len()]);
        s += a.0 * b.1 - a.1 * b.0;
    }
    0.5 * s
}

/// Parameter interval of segment `p0 + t (p1 - p0)`, `t ∈ [0, 1]`, inside a
/// convex counter-clockwise polygon (Cyrus–Beck).
fn clip_segment(p0: (f64, f64), p1: (f64, f64), poly: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let d0 = cross2(a, b, p0);
        let d1 = cross2(a, b, p1);
        if d0 < 0.0 && d1 < 0.0 {
            return None;
        }
        if d0 < 0.0 {
            lo = lo.max(d0 / (d0 - d1));
        } else if d1 < 0.0 {
            hi = hi.min(d0 / (d0 - d1));
        }
    }
    (hi - lo > 1e-12).then_some((lo, hi))
}

struct Side<'a> {
    id: usize,
    obj: &'a PlacedObject,
}

impl Side<'_> {
    fn mesh(&self) -> &PolyMesh {
        &self.obj.world
    }
}

fn push_point(points: &mut Vec<Vec3>, p: Vec3) {
    if !points.iter().any(|q| (q - p).norm() < 1e-9) {
        points.push(p);
    }
}

/// Orients an interface: `normal` points out of `a` into `b`. The body whose
/// outward normal faces more upward supports; ties go to a fixed body, then
/// to the lower id.
#[allow(clippy::too_many_arguments)]
fn orient(
    a: &Side,
    b: &Side,
    normal: Vec3,
    up: &Vec3,
    kind: InterfaceKind,
    points: Vec<Vec3>,
    faces: Option<(usize, usize)>,
    polygons: Vec<Vec<Vec3>>,
) -> ContactInterface {
    let lift = normal.dot(up);
    let a_supports = if lift > 1e-9 {
        true
    } else if lift < -1e-9 {
        false
    } else if a.obj.fixed != b.obj.fixed {
        a.obj.fixed
    } else {
        a.id < b.id
    };
    let mu = a.obj.object.mu.min(b.obj.object.mu);
    if a_supports {
        ContactInterface {
            supporting: a.id,
            supported: b.id,
            normal,
            kind,
            points,
            mu,
            faces,
            polygons,
        }
    } else {
        ContactInterface {
            supporting: b.id,
            supported: a.id,
            normal: -normal,
            kind,
            points,
            mu,
            faces: faces.map(|(fa, fb)| (fb, fa)),
            polygons,
        }
    }
}

fn face_face(a: &Side, b: &Side, up: &Vec3, tol: f64, out: &mut Vec<ContactInterface>) {
    let (ma, mb) = (a.mesh(), b.mesh());
    for (fa, face_a) in ma.faces.iter().enumerate() {
        for (fb, face_b) in mb.faces.iter().enumerate() {
            if face_a.normal.dot(&face_b.normal) > -OPPOSED_COS {
                continue;
            }
            // plane of b expressed along a's normal: n_a · p = -d_b
            if (face_a.offset + face_b.offset).abs() > tol {
                continue;
            }
            let n = face_a.normal;
            let (u, v) = tangent_frame(&n);
            let mid = n * (0.5 * (face_a.offset - face_b.offset));
            let to2 = |p: &Vec3| (p.dot(&u), p.dot(&v));
            let pieces_a: Vec<Vec<(f64, f64)>> = ma
                .convex_pieces(fa)
                .iter()
                .map(|poly| poly.iter().map(to2).collect())
                .collect();
            let pieces_b: Vec<Vec<(f64, f64)>> = mb
                .convex_pieces(fb)
                .iter()
                .map(|poly| poly.iter().rev().map(to2).collect())
                .collect();
            let mut points = Vec::new();
            let mut polygons = Vec::new();
            for pa in &pieces_a {
                for pb in &pieces_b {
                    let clipped = clip_convex(pa, pb);
                    if clipped.len() < 3 || polygon_area(&clipped) < 1e-10 {
                        continue;
                    }
                    let lifted: Vec<Vec3> = clipped
                        .iter()
                        .map(|&(x, y)| mid + u * x + v * y)
                        .collect();
                    for p in &lifted {
                        push_point(&mut points, *p);
                    }
                    polygons.push(lifted);
                }
            }
            if !points.is_empty() {
                out.push(orient(
                    a,
                    b,
                    n,
                    up,
                    InterfaceKind::FaceFace,
                    points,
                    Some((fa, fb)),
                    polygons,
                ));
            }
        }
    }
}

/// Whether face `fi` of `m` has an opposed coplanar partner among `faces` of `other`.
fn has_opposed_partner(m: &PolyMesh, fi: usize, other: &PolyMesh, of: usize, tol: f64) -> bool {
    let (f, g) = (&m.faces[fi], &other.faces[of]);
    f.normal.dot(&g.normal) <= -OPPOSED_COS && (f.offset + g.offset).abs() <= tol
}

/// Edges of `b` lying on faces of `a`.
fn edge_face(a: &Side, b: &Side, up: &Vec3, tol: f64, out: &mut Vec<ContactInterface>) {
    let (ma, mb) = (a.mesh(), b.mesh());
    let reach = ma.aabb.inflated(tol);
    for e in mb.edges.iter().filter(|e| e.convex) {
        let (p0, p1) = (e.origin, e.end());
        if !reach.contains(&p0) && !reach.contains(&p1) {
            continue;
        }
        for (fa, face) in ma.faces.iter().enumerate() {
            let n = face.normal;
            if (n.dot(&p0) - face.offset).abs() > tol || (n.dot(&p1) - face.offset).abs() > tol {
                continue;
            }
            if e.bisector().dot(&n) >= 0.0 {
                continue;
            }
            if e.faces.iter().any(|&fb| has_opposed_partner(ma, fa, mb, fb, tol)) {
                continue;
            }
            let (u, v) = tangent_frame(&n);
            let to2 = |p: &Vec3| (p.dot(&u), p.dot(&v));
            let mut intervals: Vec<(f64, f64)> = ma
                .convex_pieces(fa)
                .iter()
                .filter_map(|poly| {
                    let pts: Vec<(f64, f64)> = poly.iter().map(to2).collect();
                    clip_segment(to2(&p0), to2(&p1), &pts)
                })
                .collect();
            if intervals.is_empty() {
                continue;
            }
            intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for iv in intervals {
                match merged.last_mut() {
                    Some(last) if iv.0 <= last.1 + 1e-9 => last.1 = last.1.max(iv.1),
                    _ => merged.push(iv),
                }
            }
            let mut points = Vec::new();
            for (t0, t1) in merged {
                if (t1 - t0) * e.length < 1e-9 {
                    continue;
                }
                push_point(&mut points, p0 + (p1 - p0) * t0);
                push_point(&mut points, p0 + (p1 - p0) * t1);
            }
            if !points.is_empty() {
                out.push(orient(a, b, n, up, InterfaceKind::FaceEdge, points, None, Vec::new()));
            }
        }
    }
}

/// Isolated vertices of `b` touching faces of `a`.
fn vertex_face(a: &Side, b: &Side, up: &Vec3, tol: f64, out: &mut Vec<ContactInterface>) {
    let (ma, mb) = (a.mesh(), b.mesh());
    let reach = ma.aabb.inflated(tol);
    for (vi, p) in mb.vertices.iter().enumerate() {
        if !reach.contains(p) {
            continue;
        }
        for (fa, face) in ma.faces.iter().enumerate() {
            let n = face.normal;
            if (n.dot(p) - face.offset).abs() > tol {
                continue;
            }
            let isolated = mb.neighbors[vi]
                .iter()
                .all(|&w| n.dot(&mb.vertices[w]) - face.offset > tol);
            if !isolated || !ma.face_contains(fa, p, tol) {
                continue;
            }
            out.push(orient(a, b, n, up, InterfaceKind::FaceVertex, vec![*p], None, Vec::new()));
        }
    }
}

/// Crossing convex edges.
fn edge_edge(a: &Side, b: &Side, up: &Vec3, tol: f64, out: &mut Vec<ContactInterface>) {
    let (ma, mb) = (a.mesh(), b.mesh());
    let reach_a = mb.aabb.inflated(tol);
    let reach_b = ma.aabb.inflated(tol);
    for ea in ma.edges.iter().filter(|e| e.convex) {
        if !crate::geometry::Aabb::from_points([&ea.origin, &ea.end()]).overlaps(&reach_a) {
            continue;
        }
        for eb in mb.edges.iter().filter(|e| e.convex) {
            if !crate::geometry::Aabb::from_points([&eb.origin, &eb.end()]).overlaps(&reach_b) {
                continue;
            }
            let cr = ea.direction.cross(&eb.direction);
            if cr.norm() < 1e-6 {
                continue;
            }
            let la = crate::geometry::Line::new(ea.origin, ea.direction);
            let lb = crate::geometry::Line::new(eb.origin, eb.direction);
            let Ok((ta, tb)) = crate::geometry::closest_points_between_lines(&la, &lb) else {
                continue;
            };
            let margin = 1e-7;
            if ta <= margin || ta >= ea.length - margin || tb <= margin || tb >= eb.length - margin {
                continue;
            }
            let (pa, pb) = (la.at(ta), lb.at(tb));
            if (pa - pb).norm() > tol {
                continue;
            }
            // an edge lying in a face plane of the other body is a face contact
            let in_plane = |e: &crate::geometry::Edge, m: &PolyMesh, faces: [usize; 2]| {
                faces.iter().any(|&f| {
                    let fc = &m.faces[f];
                    (fc.normal.dot(&e.origin) - fc.offset).abs() <= tol
                        && (fc.normal.dot(&e.end()) - fc.offset).abs() <= tol
                })
            };
            if in_plane(eb, ma, ea.faces) || in_plane(ea, mb, eb.faces) {
                continue;
            }
            let mut n = cr.normalize();
            if n.dot(&ea.bisector()) < 0.0 {
                n = -n;
            }
            if n.dot(&eb.bisector()) > 0.0 {
                continue;
            }
            let p = (pa + pb) * 0.5;
            out.push(orient(a, b, n, up, InterfaceKind::EdgeEdge, vec![p], None, Vec::new()));
        }
    }
}

/// All contact interfaces between objects `ida` and `idb`.
pub fn find_interfaces(
    ida: usize,
    a: &PlacedObject,
    idb: usize,
    b: &PlacedObject,
    up: &Vec3,
    tol: f64,
) -> Vec<ContactInterface> {
    let mut out = Vec::new();
    if !a.world.aabb.inflated(tol).overlaps(&b.world.aabb) {
        return out;
    }
    let sa = Side { id: ida, obj: a };
    let sb = Side { id: idb, obj: b };
    face_face(&sa, &sb, up, tol, &mut out);
    edge_face(&sa, &sb, up, tol, &mut out);
    edge_face(&sb, &sa, up, tol, &mut out);
    vertex_face(&sa, &sb, up, tol, &mut out);
    vertex_face(&sb, &sa, up, tol, &mut out);
    edge_edge(&sa, &sb, up, tol, &mut out);
    out
}
