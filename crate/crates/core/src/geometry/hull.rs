//! QuickHull for 3D point sets, with a planar fallback.

use std::collections::{BTreeSet, HashMap};

use super::{GeometryError, Vec3};

/// Convex hull of a point set, expressed as indices into the input slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    /// Hull vertices (sorted input indices).
    pub vertices: Vec<usize>,
    /// Undirected hull edges `(i, j)` with `i < j`. Edges interior to a
    /// coplanar group of facets are not reported.
    pub edges: Vec<(usize, usize)>,
    /// True when every input point lies in a single plane; `edges` is then the
    /// boundary polygon of the planar hull.
    pub planar: bool,
}

#[derive(Debug, Clone)]
struct Facet {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Facet {
    fn new(points: &[Vec3], v: [usize; 3]) -> Self {
        let n = (points[v[1]] - points[v[0]]).cross(&(points[v[2]] - points[v[0]]));
        let normal = n.normalize();
        Facet {
            v,
            normal,
            offset: normal.dot(&points[v[0]]),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Computes the convex hull of `points`.
///
/// Fewer than three points, or a collinear set, yields
/// [`GeometryError::DegenerateHull`]. A coplanar set yields a planar hull.
pub fn quickhull(points: &[Vec3]) -> Result<ConvexHull, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateHull("fewer than three points"));
    }
    let scale = points
        .iter()
        .map(|p| p.amax())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let eps = 1e-10 * scale.max(1.0);

    // extreme pair among axis-extreme points
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        extremes.push(lo);
        extremes.push(hi);
    }
    let (mut i0, mut i1, mut best) = (0, 0, -1.0);
    for &a in &extremes {
        for &b in &extremes {
            let d = (points[a] - points[b]).norm_squared();
            if d > best {
                (i0, i1, best) = (a, b, d);
            }
        }
    }
    if best.sqrt() <= eps {
        return Err(GeometryError::DegenerateHull("coincident points"));
    }
    let dir = (points[i1] - points[i0]).normalize();
    let (mut i2, mut best) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = (p - points[i0]).cross(&dir).norm();
        if d > best {
            (i2, best) = (i, d);
        }
    }
    if best <= eps {
        return Err(GeometryError::DegenerateHull("collinear points"));
    }
    let base_normal = (points[i1] - points[i0])
        .cross(&(points[i2] - points[i0]))
        .normalize();
    let (mut i3, mut best) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = (p - points[i0]).dot(&base_normal).abs();
        if d > best {
            (i3, best) = (i, d);
        }
    }
    if best <= eps {
        return Ok(planar_hull(points, &base_normal, eps));
    }

    let mut facets: Vec<Facet> = Vec::new();
    let tet = [i0, i1, i2, i3];
    let centroid = tet.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;
    for (a, b, c) in [(0, 1, 2), (0, 3, 1), (1, 3, 2), (0, 2, 3)] {
        let mut f = Facet::new(points, [tet[a], tet[b], tet[c]]);
        if f.distance(&centroid) > 0.0 {
            f = Facet::new(points, [tet[a], tet[c], tet[b]]);
        }
        facets.push(f);
    }
    let all: Vec<usize> = (0..points.len()).filter(|i| !tet.contains(i)).collect();
    assign_outside(points, &mut facets, &[0, 1, 2, 3], all, eps);

    loop {
        let Some(fi) = facets.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            break;
        };
        let apex = *facets[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                facets[fi]
                    .distance(&points[a])
                    .total_cmp(&facets[fi].distance(&points[b]))
            })
            .unwrap();
        let visible: Vec<usize> = (0..facets.len())
            .filter(|&i| facets[i].alive && facets[i].distance(&points[apex]) > eps)
            .collect();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for &i in &visible {
            let v = facets[i].v;
            for k in 0..3 {
                directed.insert((v[k], v[(k + 1) % 3]), i);
            }
        }
        let mut orphans = Vec::new();
        for &i in &visible {
            facets[i].alive = false;
            orphans.append(&mut facets[i].outside);
        }
        orphans.retain(|&p| p != apex);
        let mut created = Vec::new();
        for &i in &visible {
            let v = facets[i].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                if !directed.contains_key(&(b, a)) {
                    facets.push(Facet::new(points, [a, b, apex]));
                    created.push(facets.len() - 1);
                }
            }
        }
        assign_outside(points, &mut facets, &created, orphans, eps);
    }

    let live: Vec<&Facet> = facets.iter().filter(|f| f.alive).collect();
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in live.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f.v[k], f.v[(k + 1) % 3]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    let mut edges = BTreeSet::new();
    for (&(a, b), fs) in &edge_faces {
        let coplanar = fs.len() == 2 && {
            let (f, g) = (live[fs[0]], live[fs[1]]);
            f.normal.dot(&g.normal) > 1.0 - 1e-9
                && g.v.iter().all(|&v| f.distance(&points[v]).abs() <= eps)
        };
        if !coplanar {
            edges.insert((a, b));
        }
    }
    let vertices: BTreeSet<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    Ok(ConvexHull {
        vertices: vertices.into_iter().collect(),
        edges: edges.into_iter().collect(),
        planar: false,
    })
}

fn assign_outside(
    points: &[Vec3],
    facets: &mut [Facet],
    candidates: &[usize],
    pts: Vec<usize>,
    eps: f64,
) {
    for p in pts {
        let mut best: Option<(usize, f64)> = None;
        for &fi in candidates {
            let d = facets[fi].distance(&points[p]);
            if d > eps && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((fi, d));
            }
        }
        if let Some((fi, _)) = best {
            facets[fi].outside.push(p);
        }
    }
}

/// Andrew's monotone chain in the plane orthogonal to `normal`.
fn planar_hull(points: &[Vec3], normal: &Vec3, eps: f64) -> ConvexHull {
    let u = super::any_orthogonal(normal);
    let v = normal.cross(&u);
    let mut idx: Vec<usize> = (0..points.len()).collect();
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.dot(&u), p.dot(&v))).collect();
    idx.sort_by(|&a, &b| {
        coords[a]
            .0
            .total_cmp(&coords[b].0)
            .then(coords[a].1.total_cmp(&coords[b].1))
    });
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (coords[o], coords[a], coords[b]);
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let area_tol = eps;
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= area_tol {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= area_tol {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let ring = lower;
    let mut edges = BTreeSet::new();
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut vertices = ring.clone();
    vertices.sort_unstable();
    vertices.dedup();
    ConvexHull {
        vertices,
        edges: edges.into_iter().collect(),
        planar: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_points() -> Vec<Vec3> {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        pts
    }

    #[test]
    fn cube_hull() {
        let mut pts = cube_points();
        pts.push(Vec3::new(0.5, 0.5, 0.5));
        pts.push(Vec3::new(0.5, 0.5, 1.0));
        let hull = quickhull(&pts).unwrap();
        assert_eq!(hull.vertices, (0..8).collect::<Vec<_>>());
        assert_eq!(hull.edges.len(), 12);
        assert!(!hull.planar);
    }

    #[test]
    fn square_hull_is_planar() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
        ];
        let hull = quickhull(&pts).unwrap();
        assert!(hull.planar);
        assert_eq!(hull.vertices, vec![0, 1, 2, 3]);
        assert_eq!(hull.edges.len(), 4);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(quickhull(&[Vec3::zeros(), Vec3::x()]).is_err());
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::x() * i as f64).collect();
        assert_eq!(
            quickhull(&line),
            Err(GeometryError::DegenerateHull("collinear points"))
        );
    }

    #[test]
    fn random_points_inside_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let pts: Vec<Vec3> = (0..200)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let hull = quickhull(&pts).unwrap();
            // every point is on the inner side of every supporting plane spanned by hull triples on an edge
            let hv: Vec<Vec3> = hull.vertices.iter().map(|&i| pts[i]).collect();
            // Euler: closed triangulated convex surface with V vertices has 3V-6 edges
            assert_eq!(hull.edges.len(), 3 * hull.vertices.len() - 6);
            for p in &pts {
                // a point strictly outside would be farther along some direction than all hull vertices
                for dir in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0), Vec3::new(-1.0, 2.0, 0.5)] {
                    let m = hv.iter().map(|h| h.dot(&dir)).fold(f64::NEG_INFINITY, f64::max);
                    assert!(p.dot(&dir) <= m + 1e-12);
                }
            }
        }
    }
}
