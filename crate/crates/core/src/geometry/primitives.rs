//! Procedural meshes used by the scene generators and tests.

use std::f64::consts::PI;

use super::{PolyMesh, Vec3};

/// Axis-aligned box centred at the origin.
pub fn box_mesh(extents: Vec3) -> PolyMesh {
    let h = extents * 0.5;
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        v.push(Vec3::new(
            if i & 1 == 0 { -h.x } else { h.x },
            if i & 2 == 0 { -h.y } else { h.y },
            if i & 4 == 0 { -h.z } else { h.z },
        ));
    }
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut t = Vec::with_capacity(12);
    for q in quads {
        t.push([q[0], q[1], q[2]]);
        t.push([q[0], q[2], q[3]]);
    }
    PolyMesh::from_triangles(v, t).expect("box mesh is closed")
}

/// Square pyramid with base `base × base` on z = 0 and apex at `height`
/// above the base centre.
pub fn pyramid_mesh(base: f64, height: f64) -> PolyMesh {
    let h = base * 0.5;
    let v = vec![
        Vec3::new(-h, -h, 0.0),
        Vec3::new(h, -h, 0.0),
        Vec3::new(h, h, 0.0),
        Vec3::new(-h, h, 0.0),
        Vec3::new(0.0, 0.0, height),
    ];
    let t = vec![[0, 2, 1], [0, 3, 2], [0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    PolyMesh::from_triangles(v, t).expect("pyramid mesh is closed")
}

/// Latitude/longitude sphere.
pub fn sphere_mesh(radius: f64, rings: usize, segments: usize) -> PolyMesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..rings {
        let theta = PI * i as f64 / rings as f64;
        for j in 0..segments {
            let phi = 2.0 * PI * j as f64 / segments as f64;
            v.push(Vec3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -radius));
    let bottom = v.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + j % segments;
    let mut t = Vec::new();
    for j in 0..segments {
        t.push([0, ring(1, j), ring(1, j + 1)]);
        t.push([bottom, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            t.push([a, c, d]);
            t.push([a, d, b]);
        }
    }
    PolyMesh::from_triangles(v, t).expect("sphere mesh is closed")
}

/// Closed surface of revolution about z from a profile of `(radius, z)`
/// points. The profile runs from the top-outer point down the outside,
/// across the axis, and back up the inside; points with zero radius become
/// single pole vertices. Consecutive profile points are joined, and the last
/// point is joined back to the first.
fn revolve(profile: &[(f64, f64)], segments: usize) -> PolyMesh {
    let mut v = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    for &(r, z) in profile {
        if r <= 0.0 {
            v.push(Vec3::new(0.0, 0.0, z));
            rings.push(vec![v.len() - 1]);
        } else {
            let mut ring = Vec::with_capacity(segments);
            for j in 0..segments {
                let phi = 2.0 * PI * j as f64 / segments as f64;
                v.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
                ring.push(v.len() - 1);
            }
            rings.push(ring);
        }
    }
    let mut t = Vec::new();
    let n = rings.len();
    for k in 0..n {
        let (a, b) = (&rings[k], &rings[(k + 1) % n]);
        match (a.len(), b.len()) {
            (1, 1) => {}
            (1, _) => {
                for j in 0..segments {
                    t.push([a[0], b[(j + 1) % segments], b[j]]);
                }
            }
            (_, 1) => {
                for j in 0..segments {
                    t.push([a[j], a[(j + 1) % segments], b[0]]);
                }
            }
            _ => {
                for j in 0..segments {
                    let j1 = (j + 1) % segments;
                    t.push([a[j], a[j1], b[j1]]);
                    t.push([a[j], b[j1], b[j]]);
                }
            }
        }
    }
    let mut mesh = PolyMesh::from_triangles(v.clone(), t.clone()).expect("revolved mesh is closed");
    if mesh.volume() < 0.0 {
        for tri in &mut t {
            tri.swap(1, 2);
        }
        mesh = PolyMesh::from_triangles(v, t).expect("revolved mesh is closed");
    }
    mesh
}

/// Hemispherical shell with a flattened base, opening upward, resting on z = 0.
///
/// `outer_radius` is the outer sphere radius, `thickness` the wall thickness
/// and `depth` the height of the shell (less than the radius, which flattens
/// the base). The number of vertices is close to `target_vertices`.
pub fn bowl_mesh(outer_radius: f64, thickness: f64, depth: f64, target_vertices: usize) -> PolyMesh {
    let k = ((target_vertices as f64 / 8.0).sqrt().round() as usize).max(1);
    let segments = (((target_vertices as f64 - 2.0) / (2.0 * (k + 1) as f64)).round() as usize).max(3);
    let ro = outer_radius;
    let ri = outer_radius - thickness;
    let zo = -depth;
    let zi = -depth + thickness;
    // polar angle measured from the downward axis
    let ao = (-zo / ro).acos();
    let ai = (-zi / ri).acos();
    let mut profile = Vec::new();
    for s in 0..=k {
        // outer wall from the rim (angle π/2) down to the flat base edge
        let a = PI / 2.0 - (PI / 2.0 - ao) * s as f64 / k as f64;
        profile.push((ro * a.sin(), -ro * a.cos()));
    }
    profile.push((0.0, zo));
    profile.push((0.0, zi));
    for s in 0..=k {
        let a = ai + (PI / 2.0 - ai) * s as f64 / k as f64;
        profile.push((ri * a.sin(), -ri * a.cos()));
    }
    for p in &mut profile {
        p.1 += depth;
    }
    revolve(&profile, segments)
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub fn triangulate_polygon(poly: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for k in 0..n {
            let (ia, ib, ic) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 1e-14 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && cross(a, b, poly[j]) >= 0.0
                    && cross(b, c, poly[j]) >= 0.0
                    && cross(c, a, poly[j]) >= 0.0
            });
            if !blocked {
                out.push([ia, ib, ic]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

/// Prism from a simple counter-clockwise polygon in the x–z plane, extruded
/// along y over `[-depth/2, depth/2]`.
pub fn extrude_xz(poly: &[(f64, f64)], depth: f64) -> PolyMesh {
    let n = poly.len();
    let h = depth * 0.5;
    let mut v = Vec::with_capacity(2 * n);
    for &(x, z) in poly {
        v.push(Vec3::new(x, -h, z));
    }
    for &(x, z) in poly {
        v.push(Vec3::new(x, h, z));
    }
    let mut t = Vec::new();
    for tri in triangulate_polygon(poly) {
        t.push([tri[0], tri[1], tri[2]]);
        t.push([n + tri[0], n + tri[2], n + tri[1]]);
    }
    for k in 0..n {
        let k1 = (k + 1) % n;
        t.push([k, n + k, n + k1]);
        t.push([k, n + k1, k1]);
    }
    let mut mesh = PolyMesh::from_triangles(v.clone(), t.clone()).expect("extruded mesh is closed");
    if mesh.volume() < 0.0 {
        for tri in &mut t {
            tri.swap(1, 2);
        }
        mesh = PolyMesh::from_triangles(v, t).expect("extruded mesh is closed");
    }
    mesh
}
