//! Interpenetration test between placed polyhedra.

use crate::geometry::{PolyMesh, Vec3};

/// Parameters in (0, 1) where segment `p0 → p1` crosses a triangle of `mesh`.
fn crossings(mesh: &PolyMesh, p0: &Vec3, p1: &Vec3) -> Vec<f64> {
    let d = p1 - p0;
    let mut out = Vec::new();
    for t in &mesh.triangles {
        let (a, b, c) = (mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        let e1 = b - a;
        let e2 = c - a;
        let h = d.cross(&e2);
        let det = e1.dot(&h);
        if det.abs() < 1e-14 * e1.norm() * e2.norm() * d.norm() {
            continue;
        }
        let s = p0 - a;
        let u = s.dot(&h) / det;
        if !(-1e-12..=1.0 + 1e-12).contains(&u) {
            continue;
        }
        let qv = s.cross(&e1);
        let v = d.dot(&qv) / det;
        if v < -1e-12 || u + v > 1.0 + 1e-12 {
            continue;
        }
        let tt = e2.dot(&qv) / det;
        if tt > 0.0 && tt < 1.0 {
            out.push(tt);
        }
    }
    out
}

fn deep_inside(mesh: &PolyMesh, p: &Vec3, tol: f64) -> bool {
    mesh.aabb.inflated(-tol).contains(p) && mesh.contains_point(p) && mesh.distance_to_surface(p) > tol
}

/// Whether some point of `a` lies inside `b` deeper than `tol`. Probes the
/// vertices, the triangle centroids, and the midpoints of the pieces into
/// which `b`'s surface cuts every edge of `a`.
fn penetrates(a: &PolyMesh, b: &PolyMesh, tol: f64) -> bool {
    if a.vertices.iter().any(|v| deep_inside(b, v, tol)) {
        return true;
    }
    let inner = b.aabb.inflated(-tol);
    for &[i, j] in &a.mesh_edges {
        let (p0, p1) = (a.vertices[i], a.vertices[j]);
        let seg_box = crate::geometry::Aabb::from_points([&p0, &p1]);
        if !seg_box.overlaps(&inner) {
            continue;
        }
        let mut ts = crossings(b, &p0, &p1);
        ts.push(0.0);
        ts.push(1.0);
        ts.sort_by(f64::total_cmp);
        for w in ts.windows(2) {
            if w[1] - w[0] < 1e-12 {
                continue;
            }
            let m = p0 + (p1 - p0) * (0.5 * (w[0] + w[1]));
            if deep_inside(b, &m, tol) {
                return true;
            }
        }
    }
    a.triangles.iter().any(|t| {
        let c = (a.vertices[t[0]] + a.vertices[t[1]] + a.vertices[t[2]]) / 3.0;
        deep_inside(b, &c, tol)
    })
}

fn tri(mesh: &PolyMesh, t: usize) -> [Vec3; 3] {
    let t = mesh.triangles[t];
    [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]
}

/// Interval of `line_dir` parameters where triangle `t` meets the plane
/// `(n, d)`, if it crosses it.
fn plane_cut(t: &[Vec3; 3], n: &Vec3, d: f64, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
    let s: Vec<f64> = t.iter().map(|p| n.dot(p) - d).collect();
    let eps = 1e-12;
    if s.iter().all(|&x| x > eps) || s.iter().all(|&x| x < -eps) {
        return None;
    }
    let mut ts = Vec::with_capacity(3);
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        if s[i].abs() <= eps {
            ts.push((t[i] - origin).dot(dir));
        }
        if (s[i] > eps && s[j] < -eps) || (s[i] < -eps && s[j] > eps) {
            let p = t[i] + (t[j] - t[i]) * (s[i] / (s[i] - s[j]));
            ts.push((p - origin).dot(dir));
        }
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo <= hi).then_some((lo, hi))
}

/// Midpoints of transversal crossings between triangles of `a` and `b`,
/// with the two triangle normals.
fn surface_crossings(a: &PolyMesh, b: &PolyMesh) -> Vec<(Vec3, Vec3, Vec3)> {
    let boxes_b: Vec<_> = (0..b.triangles.len())
        .map(|t| crate::geometry::Aabb::from_points(tri(b, t).iter()))
        .collect();
    let mut out = Vec::new();
    for ta in 0..a.triangles.len() {
        let pa = tri(a, ta);
        let box_a = crate::geometry::Aabb::from_points(pa.iter());
        if !box_a.overlaps(&b.aabb) {
            continue;
        }
        let na = (pa[1] - pa[0]).cross(&(pa[2] - pa[0])).normalize();
        for (tb, box_b) in boxes_b.iter().enumerate() {
            if !box_a.overlaps(box_b) {
                continue;
            }
            let pb = tri(b, tb);
            let nb = (pb[1] - pb[0]).cross(&(pb[2] - pb[0])).normalize();
            let dir = na.cross(&nb);
            if dir.norm() < 1e-9 {
                continue;
            }
            let dir = dir.normalize();
            let origin = pa[0];
            let (Some(ia), Some(ib)) = (
                plane_cut(&pa, &nb, nb.dot(&pb[0]), &origin, &dir),
                plane_cut(&pb, &na, na.dot(&pa[0]), &origin, &dir),
            ) else {
                continue;
            };
            let lo = ia.0.max(ib.0);
            let hi = ia.1.min(ib.1);
            if hi - lo <= 1e-12 {
                continue;
            }
            // point on the intersection line at the middle of the overlap
            let line_point = {
                let m = na.cross(&nb);
                let da = na.dot(&pa[0]);
                let db = nb.dot(&pb[0]);
                (nb.cross(&m) * da + m.cross(&na) * db) / m.norm_squared()
            };
            let base = line_point + dir * (origin - line_point).dot(&dir);
            out.push((base + dir * (0.5 * (lo + hi)), na, nb));
        }
    }
    out
}

/// Whether two meshes overlap by more than `tol`; touching is not a collision.
pub fn meshes_collide(a: &PolyMesh, b: &PolyMesh, tol: f64) -> bool {
    if !a.aabb.inflated(-tol).overlaps(&b.aabb.inflated(-tol)) {
        return false;
    }
    if penetrates(a, b, tol) || penetrates(b, a, tol) {
        return true;
    }
    // surfaces crossing away from any vertex or edge probe
    surface_crossings(a, b).iter().any(|(m, na, nb)| {
        let p = m - (na + nb) * (2.0 * tol);
        deep_inside(a, &p, tol) && deep_inside(b, &p, tol)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::box_mesh;
    use crate::geometry::Pose;
    use nalgebra::{Rotation3, Vector3};

    fn cube_at(x: f64, y: f64, z: f64) -> PolyMesh {
        box_mesh(Vec3::new(1.0, 1.0, 1.0)).transformed(&Pose::from_translation(Vec3::new(x, y, z)))
    }

    #[test]
    fn separated_touching_overlapping() {
        let a = cube_at(0.0, 0.0, 0.0);
        assert!(!meshes_collide(&a, &cube_at(2.0, 0.0, 0.0), 1e-4));
        assert!(!meshes_collide(&a, &cube_at(1.0, 0.0, 0.0), 1e-4));
        assert!(!meshes_collide(&a, &cube_at(1.0, 0.3, 0.2), 1e-4));
        assert!(meshes_collide(&a, &cube_at(0.9, 0.0, 0.0), 1e-4));
        assert!(meshes_collide(&a, &cube_at(0.9, 0.95, 0.0), 1e-4));
    }

    #[test]
    fn crossed_bars_without_inner_vertices() {
        let bar = box_mesh(Vec3::new(3.0, 0.2, 0.2));
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let other = bar.transformed(&Pose::new(*rot.matrix(), Vec3::zeros()));
        assert!(meshes_collide(&bar, &other, 1e-4));
    }

    #[test]
    fn contained_object() {
        let big = box_mesh(Vec3::new(4.0, 4.0, 4.0));
        let small = box_mesh(Vec3::new(0.5, 0.5, 0.5));
        assert!(meshes_collide(&big, &small, 1e-4));
        assert!(meshes_collide(&small, &big, 1e-4));
    }
}
