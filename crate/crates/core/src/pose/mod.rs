//! Object pose from two matched point pairs, and pose validation.

pub mod collision;

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Assembly, PlacedObject, PolyObject};
use crate::contact::ContactInterface;
use crate::geometry::{Pose, Vec3};
use crate::matching::{PairKind, SceneContactSample};
use crate::statics::{
    build_equilibrium_system, check_equilibrium, solve_reaction_forces_qp, solve_reaction_forces_qr, ForceSolution,
};

pub use collision::meshes_collide;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PoseError {
    #[error("contact points are collinear with the normal")]
    DegeneratePose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum Rejection {
    #[error("object penetrates the assembly")]
    Penetration,
    #[error("object touches nothing")]
    NoContact,
    #[error("least-norm forces need too much tension")]
    TensionScreen,
    #[error("no friction-feasible force distribution")]
    QPInfeasible,
    #[error("forces do not balance")]
    NotEquilibrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementCandidate {
    pub pose: Pose,
    pub a: SceneContactSample,
    pub b: SceneContactSample,
    pub q: Vec3,
    pub r: Vec3,
    pub kind: PairKind,
}

/// Tolerances for validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// m
    pub penetration_tol: f64,
    /// m
    pub contact_tol: f64,
    /// N
    pub tension_threshold: f64,
    /// N, absolute residual / constraint slack.
    pub equilibrium_tol: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            penetration_tol: 1e-4,
            contact_tol: 1e-4,
            tension_threshold: 5.0,
            equilibrium_tol: 1e-6,
        }
    }
}

/// Counts of how far candidates got; shared between threads.
#[derive(Debug, Default)]
pub struct StageCounters {
    pub no_match: AtomicUsize,
    pub degenerate_pose: AtomicUsize,
    pub penetration: AtomicUsize,
    pub no_contact: AtomicUsize,
    pub tension_screen: AtomicUsize,
    pub qp_infeasible: AtomicUsize,
    pub not_equilibrated: AtomicUsize,
    pub qr_solves: AtomicUsize,
    pub qp_solves: AtomicUsize,
    pub accepted: AtomicUsize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageHistogram {
    pub no_match: usize,
    pub degenerate_pose: usize,
    pub penetration: usize,
    pub no_contact: usize,
    pub tension_screen: usize,
    pub qp_infeasible: usize,
    pub not_equilibrated: usize,
    pub qr_solves: usize,
    pub qp_solves: usize,
    pub accepted: usize,
}

impl StageCounters {
    pub fn reject(&self, r: Rejection) {
        let c = match r {
            Rejection::Penetration => &self.penetration,
            Rejection::NoContact => &self.no_contact,
            Rejection::TensionScreen => &self.tension_screen,
            Rejection::QPInfeasible => &self.qp_infeasible,
            Rejection::NotEquilibrated => &self.not_equilibrated,
        };
        c.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StageHistogram {
        let g = |c: &AtomicUsize| c.load(Ordering::Relaxed);
        StageHistogram {
            no_match: g(&self.no_match),
            degenerate_pose: g(&self.degenerate_pose),
            penetration: g(&self.penetration),
            no_contact: g(&self.no_contact),
            tension_screen: g(&self.tension_screen),
            qp_infeasible: g(&self.qp_infeasible),
            not_equilibrated: g(&self.not_equilibrated),
            qr_solves: g(&self.qr_solves),
            qp_solves: g(&self.qp_solves),
            accepted: g(&self.accepted),
        }
    }
}

/// Pose mapping object points `q`, `r` onto scene points `a`, `b`.
///
/// The object frame `(û_o, q̂r, ŵ_o)` is rotated onto the scene frame
/// `(û_w, âb, ŵ_w)` where `û_w ⟂ n_a, a−b` and `û_o ⟂ n_obj, q−r`, so the
/// normal of the first object feature is turned to face `n_a`. `q` lands on `a`.
pub fn determine_pose(a: &Vec3, b: &Vec3, n_a: &Vec3, q: &Vec3, r: &Vec3, n_obj: &Vec3) -> Result<Pose, PoseError> {
    let ab = a - b;
    let qr = q - r;
    let (lab, lqr) = (ab.norm(), qr.norm());
    if lab < 1e-12 || lqr < 1e-12 {
        return Err(PoseError::DegeneratePose);
    }
    let ab = ab / lab;
    let qr = qr / lqr;
    let uw = ab.cross(n_a);
    let uo = -qr.cross(n_obj);
    if uw.norm() < 1e-9 || uo.norm() < 1e-9 {
        return Err(PoseError::DegeneratePose);
    }
    let uw = uw.normalize();
    let uo = uo.normalize();
    let ww = uw.cross(&ab).normalize();
    let wo = uo.cross(&qr).normalize();
    let s = Matrix3::from_columns(&[uw, ab, ww]);
    let o = Matrix3::from_columns(&[uo, qr, wo]);
    let rot = s * o.transpose();
    Ok(Pose::new(rot, a - rot * q))
}

/// Whether `object` placed at `pose` overlaps any assembly object.
pub fn detect_collisions(placed: &PlacedObject, assembly: &Assembly, penetration_tol: f64) -> bool {
    assembly
        .objects
        .iter()
        .any(|o| meshes_collide(&placed.world, &o.world, penetration_tol))
}

/// Contact interfaces of the placed object with the assembly.
pub fn resolve_contacts(
    placed: &PlacedObject,
    assembly: &Assembly,
    contact_tol: f64,
) -> Result<Vec<ContactInterface>, Rejection> {
    let mut scratch = Assembly::new(assembly.gravity);
    scratch.contact_tol = contact_tol;
    scratch.objects = assembly.objects.clone();
    let found = scratch.interfaces_with(placed);
    if found.is_empty() {
        Err(Rejection::NoContact)
    } else {
        Ok(found)
    }
}

/// Accepted placement.
#[derive(Debug, Clone)]
pub struct ValidatedPlacement {
    pub pose: Pose,
    pub interfaces: Vec<ContactInterface>,
    /// Friction-constrained forces for every contact of the updated assembly.
    pub forces: ForceSolution,
    pub assembly: Assembly,
}

/// Whether the support points of body `id` span a two-dimensional region
/// when viewed along `up`.
fn support_is_areal(interfaces: &[ContactInterface], id: usize, up: &Vec3) -> bool {
    let pts: Vec<Vec3> = interfaces
        .iter()
        .filter(|i| i.supported == id)
        .flat_map(|i| i.points.iter().map(|p| p - up * p.dot(up)))
        .collect();
    if pts.len() < 3 {
        return false;
    }
    let scale = pts.iter().map(|p| (p - pts[0]).norm()).fold(0.0, f64::max).max(1e-12);
    let far = pts
        .iter()
        .max_by(|x, y| (*x - pts[0]).norm().total_cmp(&(*y - pts[0]).norm()))
        .copied()
        .unwrap();
    let dir = (far - pts[0]) / scale;
    let off = pts
        .iter()
        .map(|p| (p - pts[0]).cross(&dir).norm())
        .fold(0.0, f64::max);
    off > 1e-6 * scale.max(1.0)
}

/// Collision check, contact resolution, QR tension screen, QP solve and
/// equilibrium check, in that order; stops at the first failing stage.
pub fn validate_pose(
    object: &PolyObject,
    pose: &Pose,
    assembly: &Assembly,
    config: &ValidationConfig,
    counters: &StageCounters,
) -> Result<ValidatedPlacement, Rejection> {
    let result = validate_inner(object, pose, assembly, config, counters);
    match &result {
        Ok(_) => {
            counters.accepted.fetch_add(1, Ordering::Relaxed);
        }
        Err(r) => counters.reject(*r),
    }
    result
}

fn validate_inner(
    object: &PolyObject,
    pose: &Pose,
    assembly: &Assembly,
    config: &ValidationConfig,
    counters: &StageCounters,
) -> Result<ValidatedPlacement, Rejection> {
    let placed = PlacedObject::new(object.clone(), *pose, false);
    if detect_collisions(&placed, assembly, config.penetration_tol) {
        return Err(Rejection::Penetration);
    }
    let interfaces = resolve_contacts(&placed, assembly, config.contact_tol)?;
    let id = assembly.objects.len();
    let mut next = assembly.clone();
    next.contact_tol = config.contact_tol;
    next.push(placed, interfaces.clone());

    // a single point or a line of support is never stable
    if !support_is_areal(&interfaces, id, &next.up()) {
        return Err(Rejection::TensionScreen);
    }
    let sys = build_equilibrium_system(&next.bodies(), &next.contacts(), &next.gravity)
        .map_err(|_| Rejection::TensionScreen)?;
    counters.qr_solves.fetch_add(1, Ordering::Relaxed);
    let qr = solve_reaction_forces_qr(&sys).map_err(|_| Rejection::TensionScreen)?;
    if qr.max_tension > config.tension_threshold {
        return Err(Rejection::TensionScreen);
    }
    counters.qp_solves.fetch_add(1, Ordering::Relaxed);
    let forces = solve_reaction_forces_qp(&sys).map_err(|_| Rejection::QPInfeasible)?;
    if !check_equilibrium(&forces, config.equilibrium_tol) {
        return Err(Rejection::NotEquilibrated);
    }
    Ok(ValidatedPlacement {
        pose: *pose,
        interfaces,
        forces,
        assembly: next,
    })
}
