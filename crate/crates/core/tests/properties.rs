//! Property tests over randomly generated geometry, assemblies and maps.

use std::sync::atomic::Ordering;

use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srplace::assembly::{Assembly, PlacedObject, PolyObject};
use srplace::geometry::hull::quickhull;
use srplace::geometry::mesh::tangent_frame;
use srplace::geometry::primitives::box_mesh;
use srplace::geometry::{
    closest_points_between_lines, project_point_to_line, project_point_to_plane, rotation_between_vectors, Line, Plane,
    Pose, Vec3,
};
use srplace::io::scenes::generate_scene;
use srplace::matching::{
    match_edge_edge, match_face_edge, match_face_face_coplanar, match_face_face_intersecting, PairKind,
};
use srplace::pose::{determine_pose, resolve_contacts, validate_pose, Rejection, StageCounters, ValidationConfig};
use srplace::robustness::{
    compute_sr_map, cone_line_robustness, static_robustness, ObjectRobustness, Robustness, SrMap, SrSample,
};
use srplace::sampling::{point_probabilities, SamplerState};
use srplace::statics::{solve_reaction_forces_qp, solve_reaction_forces_qr};

const G: f64 = 9.81;

fn unit(v: [f64; 3]) -> Option<Vec3> {
    let v = Vec3::from(v);
    (v.norm() > 0.2).then(|| v.normalize())
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]
}

fn assert_rotation(r: &Matrix3<f64>) -> Result<(), TestCaseError> {
    prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
    prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
    Ok(())
}

/// Floor plus one to three yawed boxes, each resting on the one below.
fn random_stack(seed: u64, mass_scale: f64) -> Assembly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut asm = Assembly::new(Vec3::new(0.0, 0.0, -G));
    let floor = PolyObject::uniform("floor", box_mesh(Vec3::new(10.0, 10.0, 1.0)), 0.0, 0.5);
    asm.add_object(floor, Pose::from_translation(Vec3::new(0.0, 0.0, -0.5)), true);
    let n = rng.random_range(1..=3);
    let mut z = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..n {
        let ext = Vec3::new(
            rng.random_range(0.4..1.0),
            rng.random_range(0.4..1.0),
            rng.random_range(0.2..0.6),
        );
        let mass = rng.random_range(0.5..3.0) * mass_scale;
        let mu = rng.random_range(0.3..0.8);
        let yaw = rng.random_range(-0.6..0.6);
        x += rng.random_range(-0.08..0.08);
        y += rng.random_range(-0.08..0.08);
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).into_inner();
        let obj = PolyObject::uniform(format!("box{i}"), box_mesh(ext), mass, mu);
        asm.add_object(obj, Pose::new(rot, Vec3::new(x, y, z + ext.z / 2.0)), false);
        z += ext.z;
    }
    asm
}

/// Net force and torque (about the centre of mass) on every movable body.
fn max_net_wrench(asm: &Assembly, forces: &[Vec3]) -> f64 {
    let contacts = asm.contacts();
    let mut worst: f64 = 0.0;
    for id in asm.movable_ids() {
        let o = &asm.objects[id];
        let com = o.world_com();
        let mut f = asm.gravity * o.object.mass;
        let mut t = Vec3::zeros();
        for (c, fc) in contacts.iter().zip(forces) {
            let sign = if c.supported == id {
                1.0
            } else if c.supporting == id {
                -1.0
            } else {
                continue;
            };
            f += fc * sign;
            t += (c.position - com).cross(&(fc * sign));
        }
        worst = worst.max(f.norm()).max(t.norm());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rotations_between_vectors_are_proper(a in vec3(), b in vec3()) {
        let (Some(a), Some(b)) = (unit(a), unit(b)) else { return Ok(()) };
        let r = rotation_between_vectors(&a, &b);
        assert_rotation(&r)?;
        prop_assert!((r * a - b).norm() < 1e-9);
    }

    #[test]
    fn quaternion_poses_are_proper(q in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64], t in vec3()) {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let pose = Pose::from_quaternion([q[0] / n, q[1] / n, q[2] / n, q[3] / n], Vec3::from(t));
        assert_rotation(&pose.rotation)?;
        assert_rotation(&pose.inverse().compose(&pose).rotation)?;
    }

    #[test]
    fn planes_lines_and_frames_are_unit(n in vec3(), o in vec3(), off in -3.0..3.0f64) {
        let Some(n) = unit(n) else { return Ok(()) };
        let scaled = n * 3.7;
        prop_assert!((Plane::new(scaled, off).normal.norm() - 1.0).abs() < 1e-9);
        prop_assert!((Line::new(Vec3::from(o), scaled).direction.norm() - 1.0).abs() < 1e-9);
        let (u, v) = tangent_frame(&n);
        let frame = Matrix3::from_columns(&[u, v, n]);
        assert_rotation(&frame)?;
    }

    #[test]
    fn projections_are_idempotent(p in vec3(), n in vec3(), o in vec3(), off in -3.0..3.0f64) {
        let Some(n) = unit(n) else { return Ok(()) };
        let plane = Plane::new(n, off);
        let once = project_point_to_plane(&Vec3::from(p), &plane);
        prop_assert!((project_point_to_plane(&once, &plane) - once).norm() < 1e-12);
        let line = Line::new(Vec3::from(o), n);
        let once = project_point_to_line(&Vec3::from(p), &line);
        prop_assert!((project_point_to_line(&once, &line) - once).norm() < 1e-12);
    }

    #[test]
    fn closest_points_are_local_minima(o1 in vec3(), d1 in vec3(), o2 in vec3(), d2 in vec3()) {
        let (Some(d1), Some(d2)) = (unit(d1), unit(d2)) else { return Ok(()) };
        prop_assume!(d1.cross(&d2).norm() > 1e-3);
        let e1 = Line::new(Vec3::from(o1), d1);
        let e2 = Line::new(Vec3::from(o2), d2);
        let (t1, t2) = closest_points_between_lines(&e1, &e2).unwrap();
        let dist = |a: f64, b: f64| (e1.at(a) - e2.at(b)).norm();
        let best = dist(t1, t2);
        for (da, db) in [(1e-4, 0.0), (-1e-4, 0.0), (0.0, 1e-4), (0.0, -1e-4)] {
            prop_assert!(dist(t1 + da, t2 + db) >= best - 1e-15);
        }
    }

    #[test]
    fn cone_robustness_grows_with_friction(r in vec3(), e in vec3(), mu in 0.0..1.5f64, extra in 0.0..1.0f64) {
        let Some(e) = unit(e) else { return Ok(()) };
        let r = Vec3::from(r);
        let low = cone_line_robustness(&r, &e, mu);
        let high = cone_line_robustness(&r, &e, mu + extra);
        prop_assert!(low.value() >= 0.0);
        prop_assert!(high >= low, "{low} > {high}");
    }

    #[test]
    fn determine_pose_maps_points_and_normals(
        q in vec3(), dir_obj in vec3(), a in vec3(), dir_scene in vec3(), len in 0.05..2.0f64,
        n_obj in vec3(), n_a in vec3(),
    ) {
        let (Some(d_o), Some(d_s), Some(n_obj), Some(n_a)) = (unit(dir_obj), unit(dir_scene), unit(n_obj), unit(n_a))
        else { return Ok(()) };
        let (q, a) = (Vec3::from(q), Vec3::from(a));
        let (r, b) = (q - d_o * len, a - d_s * len);
        // normals perpendicular to the separations
        let n_obj = n_obj - d_o * n_obj.dot(&d_o);
        let n_a = n_a - d_s * n_a.dot(&d_s);
        prop_assume!(n_obj.norm() > 0.1 && n_a.norm() > 0.1);
        let (n_obj, n_a) = (n_obj.normalize(), n_a.normalize());
        let pose = determine_pose(&a, &b, &n_a, &q, &r, &n_obj).unwrap();
        assert_rotation(&pose.rotation)?;
        prop_assert!((pose.transform_point(&q) - a).norm() < 1e-9);
        prop_assert!((pose.transform_point(&r) - b).norm() < 1e-9);
        prop_assert!((pose.transform_vector(&n_obj) + n_a).norm() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quickhull_matches_brute_force(pts in prop::collection::vec(vec3(), 4..=12)) {
        let pts: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
        let n = pts.len();
        // general position: no four points nearly coplanar
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let m = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    prop_assume!(m.norm() > 1e-3);
                    for l in k + 1..n {
                        prop_assume!(m.normalize().dot(&(pts[l] - pts[i])).abs() > 1e-3);
                    }
                }
            }
        }
        let mut vertices = std::collections::BTreeSet::new();
        let mut edges = std::collections::BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let m = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    let side: Vec<f64> = pts.iter().map(|p| m.dot(&(p - pts[i]))).collect();
                    let facet = side.iter().all(|s| *s <= 1e-12) || side.iter().all(|s| *s >= -1e-12);
                    if facet {
                        vertices.extend([i, j, k]);
                        edges.extend([(i, j), (i, k), (j, k)]);
                    }
                }
            }
        }
        let hull = quickhull(&pts).unwrap();
        prop_assert!(!hull.planar);
        prop_assert_eq!(hull.vertices.iter().copied().collect::<std::collections::BTreeSet<_>>(), vertices);
        prop_assert_eq!(hull.edges.iter().copied().collect::<std::collections::BTreeSet<_>>(), edges);
    }
}

// matching: one property per construction

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn coplanar_pair_centres_on_com(n in vec3(), axis in vec3(), off in -1.0..1.0f64, com in vec3(), len in 0.05..2.0f64) {
        let (Some(n), Some(axis)) = (unit(n), unit(axis)) else { return Ok(()) };
        prop_assume!(axis.cross(&n).norm() > 0.1);
        let plane = Plane::new(n, off);
        let com = Vec3::from(com);
        let (q, r) = match_face_face_coplanar(&plane, &axis, &com, len);
        prop_assert!(near((q - r).norm(), len));
        prop_assert!(plane.signed_distance(&q).abs() < 1e-9 && plane.signed_distance(&r).abs() < 1e-9);
        let foot = com - n * plane.signed_distance(&com);
        prop_assert!(((q + r) / 2.0 - foot).norm() < 1e-9);
        prop_assert_eq!(match_face_face_coplanar(&plane, &axis, &com, len), (q, r));
    }

    #[test]
    fn intersecting_faces_stay_in_com_section(
        n1 in vec3(), n2 in vec3(), o1 in -1.0..1.0f64, o2 in -1.0..1.0f64, com in vec3(), len in 0.05..2.0f64,
    ) {
        let (Some(n1), Some(n2)) = (unit(n1), unit(n2)) else { return Ok(()) };
        let axis = n1.cross(&n2);
        prop_assume!(axis.norm() > 0.2);
        let (p1, p2) = (Plane::new(n1, o1), Plane::new(n2, o2));
        let com = Vec3::from(com);
        let f1 = com - n1 * p1.signed_distance(&com);
        let f2 = com - n2 * p2.signed_distance(&com);
        prop_assume!((f1 - f2).norm() > 0.05);
        let (q, r) = match_face_face_intersecting(&p1, &p2, &com, len).unwrap();
        prop_assert!(near((q - r).norm(), len));
        prop_assert!(p1.signed_distance(&q).abs() < 1e-9 && p2.signed_distance(&r).abs() < 1e-9);
        let axis = axis.normalize();
        prop_assert!(axis.dot(&(q - com)).abs() < 1e-9 && axis.dot(&(r - com)).abs() < 1e-9);
        prop_assert_eq!(match_face_face_intersecting(&p1, &p2, &com, len).unwrap(), (q, r));
    }

    #[test]
    fn face_edge_intersecting_stays_in_triangle(
        n in vec3(), off in -1.0..1.0f64, o in vec3(), d in vec3(), com in vec3(), len in 0.05..2.0f64,
    ) {
        let (Some(n), Some(d)) = (unit(n), unit(d)) else { return Ok(()) };
        prop_assume!(n.dot(&d).abs() > 0.2);
        let plane = Plane::new(n, off);
        let edge = Line::new(Vec3::from(o), d);
        let com = Vec3::from(com);
        let apex = edge.at(-plane.signed_distance(&edge.origin) / n.dot(&d));
        let f1 = com - n * plane.signed_distance(&com);
        let f2 = edge.origin + d * d.dot(&(com - edge.origin));
        let m = (f1 - apex).cross(&(f2 - apex));
        prop_assume!((f1 - f2).norm() > 0.05 && m.norm() > 1e-3);
        let (kind, q, r) = match_face_edge(&plane, &edge, &com, len).unwrap();
        prop_assert_eq!(kind, PairKind::FaceEdgeIntersecting);
        prop_assert!(near((q - r).norm(), len));
        prop_assert!(plane.signed_distance(&q).abs() < 1e-9);
        prop_assert!((r - apex).cross(&d).norm() < 1e-9);
        let m = m.normalize();
        prop_assert!(m.dot(&(q - apex)).abs() < 1e-9 && m.dot(&(r - apex)).abs() < 1e-9);
    }

    #[test]
    fn face_edge_parallel_keeps_separation(
        n in vec3(), off in -1.0..1.0f64, d in vec3(), h in 0.01..0.5f64, s in vec3(), com in vec3(), len in 0.05..2.0f64,
    ) {
        let (Some(n), Some(d)) = (unit(n), unit(d)) else { return Ok(()) };
        let d = d - n * d.dot(&n);
        prop_assume!(d.norm() > 0.2);
        let plane = Plane::new(n, off);
        let base = project_point_to_plane(&Vec3::from(s), &plane);
        let edge = Line::new(base + n * h, d);
        let com = Vec3::from(com);
        match match_face_edge(&plane, &edge, &com, len) {
            Ok((kind, q, r)) => {
                prop_assert_eq!(kind, PairKind::FaceEdgeParallel);
                prop_assert!(near((q - r).norm(), len));
                prop_assert!(plane.signed_distance(&q).abs() < 1e-9);
                prop_assert!((r - edge.origin).cross(&edge.direction).norm() < 1e-9);
            }
            Err(_) => prop_assert!(len < h),
        }
    }

    #[test]
    fn parallel_edges_centre_on_projections(
        o in vec3(), d in vec3(), shift in vec3(), com in vec3(), len in 0.05..2.0f64,
    ) {
        let (Some(d), Some(shift)) = (unit(d), unit(shift)) else { return Ok(()) };
        let offset = shift - d * shift.dot(&d);
        prop_assume!(offset.norm() > 0.05);
        let e1 = Line::new(Vec3::from(o), d);
        let e2 = Line::new(Vec3::from(o) + offset, -d);
        let com = Vec3::from(com);
        let (kind, q, r) = match_edge_edge(&e1, &e2, &com, len).unwrap();
        prop_assert_eq!(kind, PairKind::EdgeEdgeParallel);
        let f1 = project_point_to_line(&com, &e1);
        let f2 = project_point_to_line(&com, &e2);
        if len < offset.norm() {
            prop_assert!(near((q - r).norm(), (f1 - f2).norm()));
        } else {
            prop_assert!(near((q - r).norm(), len));
            prop_assert!(((q + r) / 2.0 - (f1 + f2) / 2.0).norm() < 1e-9);
        }
        prop_assert!((q - e1.origin).cross(&d).norm() < 1e-9 && (r - e2.origin).cross(&d).norm() < 1e-9);
    }

    #[test]
    fn intersecting_edges_stay_in_their_plane(
        p in vec3(), d1 in vec3(), d2 in vec3(), s1 in -1.0..1.0f64, s2 in -1.0..1.0f64, com in vec3(), len in 0.05..2.0f64,
    ) {
        let (Some(d1), Some(d2)) = (unit(d1), unit(d2)) else { return Ok(()) };
        let m = d1.cross(&d2);
        prop_assume!(m.norm() > 0.2);
        let p = Vec3::from(p);
        let e1 = Line::new(p + d1 * s1, d1);
        let e2 = Line::new(p + d2 * s2, d2);
        let com = Vec3::from(com);
        let f1 = project_point_to_line(&com, &e1);
        let f2 = project_point_to_line(&com, &e2);
        prop_assume!((f1 - f2).norm() > 0.05);
        let (kind, q, r) = match_edge_edge(&e1, &e2, &com, len).unwrap();
        prop_assert_eq!(kind, PairKind::EdgeEdgeIntersecting);
        prop_assert!(near((q - r).norm(), len));
        prop_assert!((q - p).cross(&d1).norm() < 1e-9 && (r - p).cross(&d2).norm() < 1e-9);
        let m = m.normalize();
        prop_assert!(m.dot(&(q - p)).abs() < 1e-9 && m.dot(&(r - p)).abs() < 1e-9);
    }

    #[test]
    fn skew_edges_keep_separation(
        o in vec3(), d1 in vec3(), d2 in vec3(), gap in 0.02..0.5f64, com in vec3(), extra in 0.01..1.5f64,
    ) {
        let (Some(d1), Some(d2)) = (unit(d1), unit(d2)) else { return Ok(()) };
        let m = d1.cross(&d2);
        prop_assume!(m.norm() > 0.2);
        let o = Vec3::from(o);
        let e1 = Line::new(o, d1);
        let e2 = Line::new(o + m.normalize() * gap + d2 * 0.3, d2);
        let len = gap + extra;
        let com = Vec3::from(com);
        let out = match_edge_edge(&e1, &e2, &com, len).unwrap();
        prop_assert_eq!(out.0, PairKind::EdgeEdgeSkew);
        let (q, r) = (out.1, out.2);
        prop_assert!(near((q - r).norm(), len));
        prop_assert!((q - e1.origin).cross(&d1).norm() < 1e-9 && (r - e2.origin).cross(&d2).norm() < 1e-9);
        prop_assert_eq!(match_edge_edge(&e1, &e2, &com, len).unwrap(), out);
        prop_assert!(match_edge_edge(&e1, &e2, &com, gap * 0.9).is_err());
    }
}

// statics and robustness on random stacks

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn qp_is_never_below_qr(seed in any::<u64>()) {
        let asm = random_stack(seed, 1.0);
        let sys = asm.equilibrium_system().unwrap();
        let qr = solve_reaction_forces_qr(&sys).unwrap();
        let Ok(qp) = solve_reaction_forces_qp(&sys) else { return Ok(()) };
        prop_assert!(qp.objective() >= qr.objective() - 1e-9 * qr.objective().max(1.0));
        if qr.max_tension == 0.0 && qr.friction_violation == 0.0 {
            prop_assert!((qp.objective() - qr.objective()).abs() <= 1e-9 * qr.objective().max(1.0));
        }
        prop_assert!(max_net_wrench(&asm, &qp.forces) < 1e-8);
        let again = solve_reaction_forces_qp(&sys).unwrap();
        for (x, y) in qp.local.iter().zip(&again.local) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn qp_forces_scale_with_mass(seed in any::<u64>()) {
        let light = random_stack(seed, 1.0);
        let heavy = random_stack(seed, 2.0);
        let Ok(a) = solve_reaction_forces_qp(&light.equilibrium_system().unwrap()) else { return Ok(()) };
        let b = solve_reaction_forces_qp(&heavy.equilibrium_system().unwrap()).unwrap();
        let scale = a.local.iter().map(|l| l.norm()).fold(0.0, f64::max);
        for (x, y) in a.local.iter().zip(&b.local) {
            prop_assert!((x * 2.0 - y).norm() <= 1e-7 * 2.0 * scale);
        }
    }
}

fn same_map(a: &SrMap, b: &SrMap) -> bool {
    a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| {
            x.position == y.position && x.normal == y.normal && x.robustness.value().to_bits() == y.robustness.value().to_bits()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn robustness_is_homogeneous_in_mass(seed in any::<u64>(), k in 0.2..5.0f64) {
        let base = random_stack(seed, 1.0);
        let scaled = random_stack(seed, k);
        let a = compute_sr_map(&base, 30.0).unwrap();
        let b = compute_sr_map(&scaled, 30.0).unwrap();
        prop_assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let (rx, ry) = (x.robustness.value(), y.robustness.value());
            prop_assert!(rx >= 0.0);
            if rx.is_infinite() {
                prop_assert!(ry.is_infinite());
            } else {
                prop_assert!((ry - k * rx).abs() <= 1e-6 * (k * rx).max(1e-9), "{} vs {}", ry, k * rx);
            }
        }
    }

    #[test]
    fn sr_map_is_reproducible_and_pointwise(seed in any::<u64>()) {
        let asm = random_stack(seed, 1.0);
        let map = compute_sr_map(&asm, 30.0).unwrap();
        prop_assert!(same_map(&map, &compute_sr_map(&asm, 30.0).unwrap()));
        let sys = asm.equilibrium_system().unwrap();
        let forces = solve_reaction_forces_qr(&sys).unwrap();
        for s in map.samples.iter().step_by(7) {
            let push = -s.normal;
            let direct = static_robustness(&asm, s.object, &s.position, &push).unwrap();
            let (x, y) = (s.robustness.value(), direct.value());
            prop_assert!(x == y || (x - y).abs() <= 1e-6 * x.max(1.0));
            if s.fixed {
                prop_assert!(s.robustness.is_infinite());
                continue;
            }
            let obj = ObjectRobustness::from_assembly(&asm, &forces, &sys.contacts, s.object);
            let r = obj.robustness(&s.position, &push);
            prop_assert!(r <= obj.slipping(&push) && r <= obj.toppling(&s.position, &push));
        }
    }
}

// sampler

fn random_map(seed: u64, n: usize) -> SrMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let fixed = rng.random_bool(0.3);
            let r = if fixed || rng.random_bool(0.1) {
                f64::INFINITY
            } else {
                rng.random_range(0.0..10.0)
            };
            SrSample {
                position: Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0)),
                normal: Vec3::z(),
                object: usize::from(!fixed) + i % 2,
                face: 0,
                fixed,
                robustness: Robustness::new(r),
            }
        })
        .collect();
    SrMap { samples, density: 1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn probabilities_form_a_distribution(seed in any::<u64>(), n in 2usize..60, q in 0.1..20.0f64, k in 0usize..50, fixed in any::<bool>()) {
        let map = random_map(seed, n);
        let mut state = SamplerState::new(q, 0.99, 0.5, 2.0, Vec3::zeros());
        state.k = k;
        state.allow_fixed_support = fixed;
        let Ok(p) = point_probabilities(&map, &state) else { return Ok(()) };
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raising_a_sample_raises_only_its_share(seed in any::<u64>(), n in 3usize..40, pick in any::<prop::sample::Index>(), bump in 0.01..1.0f64) {
        let mut map = random_map(seed, n);
        let state = SamplerState::new(11.5, 0.99, 0.5, 2.0, Vec3::zeros());
        let movable: Vec<usize> = (0..n).filter(|&i| !map.samples[i].fixed && map.samples[i].robustness.value().is_finite()).collect();
        prop_assume!(!movable.is_empty());
        let i = movable[pick.index(movable.len())];
        // a lone weighted sample already holds the whole distribution
        prop_assume!((0..n).any(|j| j != i && !map.samples[j].fixed && map.samples[j].robustness.value() > 0.0));
        let Ok(before) = point_probabilities(&map, &state) else { return Ok(()) };
        let r = map.samples[i].robustness.value();
        map.samples[i].robustness = Robustness::new(r + bump);
        let after = point_probabilities(&map, &state).unwrap();
        prop_assert!(after[i] > before[i]);
        for j in (0..n).filter(|&j| j != i) {
            prop_assert!(after[j] <= before[j] + 1e-15);
        }
    }

    #[test]
    fn saturation_decays_geometrically(q0 in 0.01..100.0f64, lambda in 0.5..0.999f64) {
        let mut state = SamplerState::new(q0, lambda, 0.5, 1.0, Vec3::zeros());
        let mut prev = state.q();
        for _ in 0..500 {
            state.advance();
            let q = state.q();
            prop_assert!(q > 0.0 && q < prev);
            prop_assert!((q / prev - lambda).abs() < 1e-12);
            prev = q;
        }
    }

    #[test]
    fn fixed_support_spreads_with_iterations(seed in any::<u64>(), n in 4usize..60, scale in 0.5..3.0f64) {
        let map = random_map(seed, n);
        prop_assume!(map.samples.iter().filter(|s| s.fixed).count() >= 2);
        let centre = Vec3::new(0.3, -0.2, 0.1);
        let mut state = SamplerState::new(5.0, 0.99, 0.5, scale, centre);
        state.allow_fixed_support = true;
        let mut prev = 0.0;
        for _ in 0..30 {
            let p = point_probabilities(&map, &state).unwrap();
            let (mut w, mut m2) = (0.0, 0.0);
            for (x, s) in p.iter().zip(&map.samples).filter(|(_, s)| s.fixed) {
                w += x;
                m2 += x * (s.position - centre).norm_squared();
            }
            let spread = if w > 0.0 { m2 / w } else { prev };
            prop_assert!(spread >= prev - 1e-9 * prev.max(1.0), "{spread} < {prev}");
            prev = spread;
            state.advance();
        }
    }
}

// pose validation

fn random_cube_pose(rng: &mut ChaCha8Rng) -> Pose {
    let rot = if rng.random_bool(0.5) {
        Matrix3::identity()
    } else {
        let axis = Unit::new_normalize(Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0));
        Rotation3::from_axis_angle(&axis, rng.random_range(-0.4..0.4)).into_inner()
    };
    let dz = [0.0, 0.0, 0.01, -0.05][rng.random_range(0..4)];
    let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Pose::new(rot, Vec3::new(x + 0.04, y + 0.1, 1.8 + 0.2 + dz))
}

#[test]
fn validation_short_circuits() {
    let asm = generate_scene("stack").unwrap().build(std::path::Path::new(".")).unwrap();
    let cube = PolyObject::uniform("cube", box_mesh(Vec3::new(0.4, 0.4, 0.4)), 1.0, 0.5);
    let config = ValidationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen = std::collections::BTreeMap::new();
    for _ in 0..600 {
        let counters = StageCounters::default();
        let res = validate_pose(&cube, &random_cube_pose(&mut rng), &asm, &config, &counters);
        let qr = counters.qr_solves.load(Ordering::Relaxed);
        let qp = counters.qp_solves.load(Ordering::Relaxed);
        let stage = match res {
            Ok(_) => None,
            Err(r) => Some(r),
        };
        match stage {
            Some(Rejection::Penetration | Rejection::NoContact) => assert_eq!((qr, qp), (0, 0)),
            Some(Rejection::TensionScreen) => assert_eq!(qp, 0),
            Some(Rejection::QPInfeasible | Rejection::NotEquilibrated) | None => assert_eq!((qr, qp), (1, 1)),
        }
        *seen.entry(format!("{stage:?}")).or_insert(0) += 1;
    }
    for key in ["Some(Penetration)", "Some(NoContact)", "Some(TensionScreen)", "None"] {
        assert!(seen.contains_key(key), "{key} never reached: {seen:?}");
    }
}

#[test]
fn contact_corners_lie_on_both_faces() {
    let asm = generate_scene("stack").unwrap().build(std::path::Path::new(".")).unwrap();
    let cube = PolyObject::uniform("cube", box_mesh(Vec3::new(0.4, 0.4, 0.4)), 1.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..200 {
        let yaw = rng.random_range(-3.0..3.0);
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).into_inner();
        let pos = Vec3::new(rng.random_range(-0.8..0.9), rng.random_range(-0.8..0.9), 2.0);
        let placed = PlacedObject::new(cube.clone(), Pose::new(rot, pos), false);
        let Ok(interfaces) = resolve_contacts(&placed, &asm, 1e-4) else { continue };
        for i in &interfaces {
            let Some((fs, fo)) = i.faces else { continue };
            let support = &asm.objects[i.supporting].world.faces[fs];
            let own = &placed.world.faces[fo];
            for p in &i.points {
                assert!((support.normal.dot(p) - support.offset).abs() < 1e-4);
                assert!((own.normal.dot(p) - own.offset).abs() < 1e-4);
            }
            checked += 1;
        }
    }
    assert!(checked > 50, "only {checked} interfaces");
}

/// Two unit cubes, the upper one pushed sideways at mid-height: slipping
/// (μ m g) is the weaker mode.
#[test]
fn pushed_stack_top_slips() {
    let mut asm = Assembly::new(Vec3::new(0.0, 0.0, -G));
    let floor = PolyObject::uniform("floor", box_mesh(Vec3::new(10.0, 10.0, 1.0)), 0.0, 0.5);
    asm.add_object(floor, Pose::from_translation(Vec3::new(0.0, 0.0, -0.5)), true);
    for z in [0.5, 1.5] {
        let cube = PolyObject::uniform("cube", box_mesh(Vec3::new(1.0, 1.0, 1.0)), 1.0, 0.5);
        asm.add_object(cube, Pose::from_translation(Vec3::new(0.0, 0.0, z)), false);
    }
    let r = static_robustness(&asm, 2, &Vec3::new(-0.5, 0.0, 1.5), &Vec3::x()).unwrap();
    assert!((r.value() - 0.5 * 1.0 * G).abs() < 1e-6, "{r}");
}
