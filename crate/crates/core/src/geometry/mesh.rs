//! Watertight triangle meshes with merged planar faces and feature edges.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Aabb, GeometryError, Pose, Vec3, MERGE_ANGLE_DEG, MERGE_PLANE_TOL};

/// Maximal planar region of a mesh.
#[derive(Debug, Clone)]
pub struct Face {
    /// Outward unit normal.
    pub normal: Vec3,
    /// Plane offset, `normal · p = offset` for points on the face.
    pub offset: f64,
    /// Indices into [`PolyMesh::triangles`].
    pub triangles: Vec<usize>,
    /// Boundary loops as vertex indices. The first loop is the outer boundary
    /// (counter-clockwise about `normal`), any further loops are holes.
    pub loops: Vec<Vec<usize>>,
    pub area: f64,
    pub centroid: Vec3,
    /// Single loop with no reflex corner.
    pub convex: bool,
}

/// Feature edge: a mesh edge shared by two distinct faces.
///
/// The direction follows the counter-clockwise loop of `faces[1]`. The side
/// vectors lie in their faces and point away from the edge:
/// `sides[0] = direction × normals[0]`, `sides[1] = normals[1] × direction`.
#[derive(Debug, Clone)]
pub struct Edge {
    pub faces: [usize; 2],
    pub vertices: [usize; 2],
    pub origin: Vec3,
    pub direction: Vec3,
    pub length: f64,
    pub normals: [Vec3; 2],
    pub sides: [Vec3; 2],
    pub convex: bool,
}

impl Edge {
    pub fn end(&self) -> Vec3 {
        self.origin + self.direction * self.length
    }

    pub fn midpoint(&self) -> Vec3 {
        self.origin + self.direction * (0.5 * self.length)
    }

    /// Unit bisector of the two face normals.
    pub fn bisector(&self) -> Vec3 {
        let b = self.normals[0] + self.normals[1];
        let n = b.norm();
        if n < 1e-12 {
            self.sides[0].cross(&self.direction).normalize()
        } else {
            b / n
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    pub edges: Vec<Edge>,
    /// Face index of every triangle.
    pub triangle_face: Vec<usize>,
    /// Unique undirected mesh edges.
    pub mesh_edges: Vec<[usize; 2]>,
    /// Vertex adjacency lists.
    pub neighbors: Vec<Vec<usize>>,
    pub aabb: Aabb,
}

/// Groups coplanar adjacent triangles into faces and finds feature edges.
pub fn extract_features(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
) -> Result<(Vec<Face>, Vec<Edge>), GeometryError> {
    let mesh = PolyMesh::from_triangles(vertices.to_vec(), triangles.to_vec())?;
    Ok((mesh.faces, mesh.edges))
}

fn triangle_normal(v: &[Vec3], t: &[usize; 3]) -> Vec3 {
    (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]]))
}

impl PolyMesh {
    /// Builds a mesh from a closed, consistently oriented (outward, CCW)
    /// triangle soup with shared vertex indices.
    pub fn from_triangles(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::InvalidMesh("no triangles".into()));
        }
        let mut half: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(GeometryError::InvalidMesh(format!("triangle {ti} has an out-of-range index")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(GeometryError::InvalidMesh(format!("triangle {ti} repeats a vertex")));
            }
            if triangle_normal(&vertices, t).norm() < 1e-14 {
                return Err(GeometryError::InvalidMesh(format!("triangle {ti} has zero area")));
            }
            for k in 0..3 {
                if half.insert((t[k], t[(k + 1) % 3]), ti).is_some() {
                    return Err(GeometryError::InvalidMesh(format!(
                        "directed edge {}->{} used twice",
                        t[k],
                        t[(k + 1) % 3]
                    )));
                }
            }
        }
        for &(a, b) in half.keys() {
            if !half.contains_key(&(b, a)) {
                return Err(GeometryError::InvalidMesh(format!("open edge {a}-{b}")));
            }
        }

        let normals: Vec<Vec3> = triangles
            .iter()
            .map(|t| triangle_normal(&vertices, t).normalize())
            .collect();
        let cos_tol = MERGE_ANGLE_DEG.to_radians().cos();
        let mut triangle_face = vec![usize::MAX; triangles.len()];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for seed in 0..triangles.len() {
            if triangle_face[seed] != usize::MAX {
                continue;
            }
            let fid = groups.len();
            let n0 = normals[seed];
            let d0 = n0.dot(&vertices[triangles[seed][0]]);
            let mut members = vec![seed];
            triangle_face[seed] = fid;
            let mut stack = vec![seed];
            while let Some(t) = stack.pop() {
                let tri = triangles[t];
                for k in 0..3 {
                    let nb = half[&(tri[(k + 1) % 3], tri[k])];
                    if triangle_face[nb] != usize::MAX {
                        continue;
                    }
                    let coplanar = normals[nb].dot(&n0) >= cos_tol
                        && triangles[nb]
                            .iter()
                            .all(|&v| (n0.dot(&vertices[v]) - d0).abs() <= MERGE_PLANE_TOL);
                    if coplanar {
                        triangle_face[nb] = fid;
                        members.push(nb);
                        stack.push(nb);
                    }
                }
            }
            groups.push(members);
        }

        let mut faces = Vec::with_capacity(groups.len());
        for members in &groups {
            faces.push(build_face(&vertices, &triangles, &triangle_face, &half, members));
        }

        let mut edges = Vec::new();
        let mut mesh_edges = Vec::new();
        let mut neighbors = vec![Vec::new(); vertices.len()];
        let mut keys: Vec<(usize, usize)> = half.keys().copied().filter(|&(a, b)| a < b).collect();
        keys.sort_unstable();
        for (a, b) in keys {
            mesh_edges.push([a, b]);
            neighbors[a].push(b);
            neighbors[b].push(a);
            // the half-edge a->b lives in the triangle whose face becomes faces[1]
            let f2 = triangle_face[half[&(a, b)]];
            let f1 = triangle_face[half[&(b, a)]];
            if f1 == f2 {
                continue;
            }
            let origin = vertices[a];
            let span = vertices[b] - origin;
            let length = span.norm();
            let direction = span / length;
            let n1 = faces[f1].normal;
            let n2 = faces[f2].normal;
            let s1 = direction.cross(&n1).normalize();
            let s2 = n2.cross(&direction).normalize();
            edges.push(Edge {
                faces: [f1, f2],
                vertices: [a, b],
                origin,
                direction,
                length,
                normals: [n1, n2],
                sides: [s1, s2],
                convex: s1.dot(&n2) < 0.0,
            });
        }
        let aabb = Aabb::from_points(vertices.iter());
        Ok(PolyMesh {
            vertices,
            triangles,
            faces,
            edges,
            triangle_face,
            mesh_edges,
            neighbors,
            aabb,
        })
    }

    /// Copy of the mesh with every geometric quantity mapped through `pose`.
    pub fn transformed(&self, pose: &Pose) -> PolyMesh {
        let vertices: Vec<Vec3> = self.vertices.iter().map(|v| pose.transform_point(v)).collect();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let normal = pose.transform_vector(&f.normal);
                let centroid = pose.transform_point(&f.centroid);
                Face {
                    normal,
                    offset: normal.dot(&centroid),
                    centroid,
                    ..f.clone()
                }
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                origin: pose.transform_point(&e.origin),
                direction: pose.transform_vector(&e.direction),
                normals: e.normals.map(|n| pose.transform_vector(&n)),
                sides: e.sides.map(|s| pose.transform_vector(&s)),
                ..e.clone()
            })
            .collect();
        let aabb = Aabb::from_points(vertices.iter());
        PolyMesh {
            vertices,
            triangles: self.triangles.clone(),
            faces,
            edges,
            triangle_face: self.triangle_face.clone(),
            mesh_edges: self.mesh_edges.clone(),
            neighbors: self.neighbors.clone(),
            aabb,
        }
    }

    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                self.vertices[t[0]].dot(&self.vertices[t[1]].cross(&self.vertices[t[2]])) / 6.0
            })
            .sum()
    }

    /// Centroid of the enclosed solid (uniform density).
    pub fn volume_centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut vol = 0.0;
        for t in &self.triangles {
            let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
            let v = a.dot(&b.cross(&c)) / 6.0;
            vol += v;
            acc += (a + b + c) * (v / 4.0);
        }
        acc / vol
    }

    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|f| f.area).sum()
    }

    /// Largest distance from `center` to a vertex.
    pub fn radius_about(&self, center: &Vec3) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    /// Generalized winding number of the surface about `p`.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for t in &self.triangles {
            let a = self.vertices[t[0]] - p;
            let b = self.vertices[t[1]] - p;
            let c = self.vertices[t[2]] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.aabb.contains(p) && self.winding_number(p) > 0.5
    }

    /// Unsigned distance from `p` to the surface.
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let q = closest_point_on_triangle(
                    p,
                    &self.vertices[t[0]],
                    &self.vertices[t[1]],
                    &self.vertices[t[2]],
                );
                (q - p).norm_squared()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Whether `p` lies on face `fi` within `tol` of its plane and inside its
    /// boundary (with an in-plane margin of `tol`).
    pub fn face_contains(&self, fi: usize, p: &Vec3, tol: f64) -> bool {
        let f = &self.faces[fi];
        if (f.normal.dot(p) - f.offset).abs() > tol {
            return false;
        }
        f.triangles.iter().any(|&t| {
            let tri = self.triangles[t];
            point_in_triangle(
                p,
                &self.vertices[tri[0]],
                &self.vertices[tri[1]],
                &self.vertices[tri[2]],
                &f.normal,
                tol,
            )
        })
    }

    /// Loop of face `fi` as world points.
    pub fn loop_points(&self, fi: usize, k: usize) -> Vec<Vec3> {
        self.faces[fi].loops[k].iter().map(|&i| self.vertices[i]).collect()
    }

    /// Convex polygons (counter-clockwise about the face normal) whose union
    /// is face `fi`.
    pub fn convex_pieces(&self, fi: usize) -> Vec<Vec<Vec3>> {
        let f = &self.faces[fi];
        if f.convex {
            vec![self.loop_points(fi, 0)]
        } else {
            f.triangles
                .iter()
                .map(|&t| self.triangles[t].iter().map(|&i| self.vertices[i]).collect())
                .collect()
        }
    }

    /// Stratified jittered samples on face `fi` at `density` points per m².
    ///
    /// The grid is aligned with the face's tangent frame and shifted by a
    /// random offset; each cell receives one jittered point, which is kept if
    /// it falls on the face. The expected sample count is `area · density`.
    pub fn sample_face(&self, fi: usize, density: f64, seed: u64) -> Vec<Vec3> {
        let f = &self.faces[fi];
        let h = 1.0 / density.sqrt();
        let (u, v) = tangent_frame(&f.normal);
        let origin = f.normal * f.offset;
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &t in &f.triangles {
            for &i in &self.triangles[t] {
                let q = self.vertices[i] - origin;
                let (x, y) = (q.dot(&u), q.dot(&v));
                lo = (lo.0.min(x), lo.1.min(y));
                hi = (hi.0.max(x), hi.1.max(y));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (rng.random::<f64>() * h, rng.random::<f64>() * h);
        let x0 = lo.0 - shift.0;
        let y0 = lo.1 - shift.1;
        let nx = ((hi.0 - x0) / h).ceil().max(1.0) as usize;
        let ny = ((hi.1 - y0) / h).ceil().max(1.0) as usize;
        let mut out = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let x = x0 + (i as f64 + rng.random::<f64>()) * h;
                let y = y0 + (j as f64 + rng.random::<f64>()) * h;
                let p = origin + u * x + v * y;
                if self.face_contains(fi, &p, 0.0) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Right-handed tangent frame `(û, v̂)` for normal `n`: û is the world x axis
/// projected into the plane (y axis when x is near-parallel to `n`), v̂ = n × û.
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let mut u = Vec3::x() - n * n.x;
    if u.norm() < 1e-6 {
        u = Vec3::y() - n * n.y;
    }
    let u = u.normalize();
    (u, n.cross(&u))
}

fn build_face(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    triangle_face: &[usize],
    half: &HashMap<(usize, usize), usize>,
    members: &[usize],
) -> Face {
    let mut nsum = Vec3::zeros();
    let mut csum = Vec3::zeros();
    let mut area = 0.0;
    for &t in members {
        let tri = triangles[t];
        let n = triangle_normal(vertices, &tri);
        let a = 0.5 * n.norm();
        nsum += n;
        area += a;
        csum += (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) * (a / 3.0);
    }
    let normal = nsum.normalize();
    let centroid = csum / area;
    let fid = triangle_face[members[0]];

    // boundary half-edges: those whose twin lies in another face
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut count = 0;
    for &t in members {
        let tri = triangles[t];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if triangle_face[half[&(b, a)]] != fid {
                next.entry(a).or_default().push(b);
                count += 1;
            }
        }
    }
    let mut loops = Vec::new();
    let mut used = 0;
    while used < count {
        let start = *next
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, _)| k)
            .min()
            .unwrap();
        let mut lp = vec![start];
        let mut cur = start;
        loop {
            let nb = next.get_mut(&cur).unwrap().pop().unwrap();
            used += 1;
            if nb == start {
                break;
            }
            lp.push(nb);
            cur = nb;
        }
        loops.push(simplify_loop(vertices, lp, &normal));
    }
    let signed_area = |lp: &Vec<usize>| {
        let mut s = Vec3::zeros();
        for k in 0..lp.len() {
            s += vertices[lp[k]].cross(&vertices[lp[(k + 1) % lp.len()]]);
        }
        0.5 * s.dot(&normal)
    };
    loops.sort_by(|a, b| signed_area(b).total_cmp(&signed_area(a)));
    let convex = loops.len() == 1 && {
        let lp = &loops[0];
        (0..lp.len()).all(|k| {
            let p0 = vertices[lp[(k + lp.len() - 1) % lp.len()]];
            let p1 = vertices[lp[k]];
            let p2 = vertices[lp[(k + 1) % lp.len()]];
            (p1 - p0).cross(&(p2 - p1)).dot(&normal) >= -1e-12
        })
    };
    let offset = normal.dot(&centroid);
    Face {
        normal,
        offset,
        triangles: members.to_vec(),
        loops,
        area,
        centroid,
        convex,
    }
}

/// Drops loop vertices that sit on a straight run.
fn simplify_loop(vertices: &[Vec3], lp: Vec<usize>, normal: &Vec3) -> Vec<usize> {
    if lp.len() <= 3 {
        return lp;
    }
    let n = lp.len();
    let keep: Vec<usize> = (0..n)
        .filter(|&k| {
            let p0 = vertices[lp[(k + n - 1) % n]];
            let p1 = vertices[lp[k]];
            let p2 = vertices[lp[(k + 1) % n]];
            let (d0, d1) = (p1 - p0, p2 - p1);
            let turn = d0.cross(&d1).dot(normal).abs();
            !(turn <= 1e-9 * d0.norm() * d1.norm() && d0.dot(&d1) > 0.0)
        })
        .map(|k| lp[k])
        .collect();
    if keep.len() >= 3 {
        keep
    } else {
        lp
    }
}

/// Point-in-triangle test in the triangle's plane with an in-plane margin.
pub fn point_in_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, n: &Vec3, margin: f64) -> bool {
    for (s, e) in [(a, b), (b, c), (c, a)] {
        let edge = e - s;
        let len = edge.norm();
        // signed distance of p to the edge line, positive inside
        let d = n.cross(&edge).dot(&(p - s)) / len;
        if d < -margin {
            return false;
        }
    }
    true
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Loads a Wavefront OBJ file. Polygons are fan-triangulated and coincident
/// vertices are welded.
pub fn load_obj(path: &Path) -> Result<PolyMesh, GeometryError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GeometryError::InvalidMesh(format!("{}: {e}", path.display())))?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<PolyMesh, GeometryError> {
    let mut raw: Vec<Vec3> = Vec::new();
    let mut polys: Vec<Vec<usize>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = |what: &str| GeometryError::InvalidMesh(format!("line {}: {what}", lineno + 1));
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| bad("bad coordinate")))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                raw.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                    let resolved = if idx < 0 { raw.len() as i64 + idx } else { idx - 1 };
                    if resolved < 0 || resolved as usize >= raw.len() {
                        return Err(bad("face index out of range"));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(bad("face needs three vertices"));
                }
                polys.push(poly);
            }
            _ => {}
        }
    }
    let mut weld: HashMap<[u64; 3], usize> = HashMap::new();
    let mut remap = Vec::with_capacity(raw.len());
    let mut vertices = Vec::new();
    for v in &raw {
        let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
        let id = *weld.entry(key).or_insert_with(|| {
            vertices.push(*v);
            vertices.len() - 1
        });
        remap.push(id);
    }
    let mut triangles = Vec::new();
    for poly in polys {
        for k in 1..poly.len() - 1 {
            triangles.push([remap[poly[0]], remap[poly[k]], remap[poly[k + 1]]]);
        }
    }
    PolyMesh::from_triangles(vertices, triangles)
}
