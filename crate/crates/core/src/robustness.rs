//! Static robustness: the largest push an object tolerates at a surface
//! point before slipping or toppling, and maps of it over a scene.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::assembly::Assembly;
use crate::geometry::{quickhull, Vec3};
use crate::statics::{solve_reaction_forces_qr, ContactPoint, ForceSolution, StaticsError};

/// Default surface sampling density (samples per m²).
pub const DEFAULT_DENSITY: f64 = 200.0;

/// Moment tolerance (N·m per N of push) for toppling sign tests.
const MOMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustnessError {
    #[error("assembly is not in equilibrium: {0}")]
    NotInEquilibrium(StaticsError),
    #[error("fewer than three non-collinear contact points")]
    NoAxes,
}

/// Non-negative force magnitude in newtons, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robustness(f64);

impl Robustness {
    pub const ZERO: Robustness = Robustness(0.0);
    pub const INFINITE: Robustness = Robustness(f64::INFINITY);

    /// Negative and NaN inputs map to zero.
    pub fn new(v: f64) -> Self {
        if v > 0.0 {
            Robustness(v)
        } else {
            Robustness(0.0)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn min(self, other: Robustness) -> Robustness {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Eq for Robustness {}

impl PartialOrd for Robustness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Robustness {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::ops::Add for Robustness {
    type Output = Robustness;
    fn add(self, rhs: Robustness) -> Robustness {
        Robustness(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Robustness {
    fn sum<I: Iterator<Item = Robustness>>(iter: I) -> Robustness {
        iter.fold(Robustness::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{:.6}", self.0)
        }
    }
}

impl Serialize for Robustness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Robustness {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Option<f64> = Option::deserialize(d)?;
        Ok(v.map_or(Robustness::INFINITE, Robustness::new))
    }
}

/// Distance along the line `r + s·e` (local contact frame, components
/// `(u, v, n)`) until it leaves the friction cone `‖(u, v)‖ ≤ μ n`.
///
/// Zero when `r` already violates the cone; infinite when the line does not
/// leave it for any positive `s`.
pub fn cone_line_robustness(r: &Vec3, e: &Vec3, mu: f64) -> Robustness {
    let mu2 = mu * mu;
    let a = mu2 * e.z * e.z - e.x * e.x - e.y * e.y;
    let b = 2.0 * (mu2 * r.z * e.z - r.x * e.x - r.y * e.y);
    let c = mu2 * r.z * r.z - r.x * r.x - r.y * r.y;
    if c < 0.0 || r.z < 0.0 {
        return Robustness::ZERO;
    }
    let scale = r.norm().max(1e-300);
    let (s, other) = if a.abs() <= 1e-14 {
        if b.abs() <= 1e-14 * scale {
            return Robustness::INFINITE;
        }
        (-c / b, f64::NEG_INFINITY)
    } else {
        let mut disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            // a line through the apex has a double root that rounding can push below zero
            if disc < -1e-12 * b * b {
                // starting inside, a line that never meets the surface stays inside
                return Robustness::INFINITE;
            }
            disc = 0.0;
        }
        let sq = disc.sqrt();
        ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
    };
    if s.abs() <= 1e-12 * scale {
        // on the cone surface: leaving immediately, or entering and leaving later
        let outward = b < 0.0 || (b.abs() <= 1e-14 * scale && a < 0.0);
        if outward {
            return Robustness::ZERO;
        }
        return if other > 1e-12 * scale {
            Robustness::new(other)
        } else {
            Robustness::INFINITE
        };
    }
    if s < 0.0 {
        Robustness::INFINITE
    } else {
        Robustness::new(s)
    }
}

/// Sum over contacts of the push magnitude along world direction `e_hat`
/// that drives each reaction out of its friction cone.
///
/// `local` holds the `(f_u, f_v, f_n)` reaction of each contact; the reaction
/// must grow against the push, so each line runs along `-e_hat`.
pub fn slipping_robustness(contacts: &[ContactPoint], local: &[Vec3], e_hat: &Vec3) -> Robustness {
    contacts
        .iter()
        .zip(local)
        .map(|(c, r)| cone_line_robustness(r, &c.to_local(&-e_hat), c.mu))
        .sum()
}

/// Oriented hull edge of the contact points; rotation about it follows the
/// right-hand rule along `end - start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopplingAxis {
    pub start: Vec3,
    pub end: Vec3,
}

impl TopplingAxis {
    pub fn direction(&self) -> Vec3 {
        (self.end - self.start).normalize()
    }

    /// Moment of force `f` applied at `p` about this axis.
    pub fn moment(&self, p: &Vec3, f: &Vec3) -> f64 {
        (p - self.start).cross(f).dot(&self.direction())
    }

    fn distance(&self, p: &Vec3) -> f64 {
        (p - self.start).cross(&self.direction()).norm()
    }
}

/// Both orientations of every convex-hull edge of `points`.
pub fn toppling_axes(points: &[Vec3]) -> Result<Vec<TopplingAxis>, RobustnessError> {
    let hull = quickhull(points).map_err(|_| RobustnessError::NoAxes)?;
    Ok(hull
        .edges
        .iter()
        .flat_map(|&(i, j)| {
            [
                TopplingAxis { start: points[i], end: points[j] },
                TopplingAxis { start: points[j], end: points[i] },
            ]
        })
        .collect())
}

/// An axis is a candidate for toppling when gravity holds the object down
/// about it and no compressive contact force resists rotation about it.
/// Contacts on the axis carry no moment and are ignored.
pub fn validate_axis(
    axis: &TopplingAxis,
    contacts: &[ContactPoint],
    local: &[Vec3],
    mass: f64,
    com: &Vec3,
    gravity: &Vec3,
) -> bool {
    let weight = mass * gravity.norm();
    let tol = MOMENT_EPS * weight.max(1e-300);
    let gravity_moment = axis.moment(com, &(gravity * mass));
    if gravity_moment >= -tol {
        return false;
    }
    contacts.iter().zip(local).all(|(c, f)| {
        // tensile reactions cannot hold the object down
        if axis.distance(&c.position) <= 1e-9 || f.z <= 0.0 {
            return true;
        }
        axis.moment(&c.position, &(c.normal * f.z)) >= -tol
    })
}

/// Toppling limit for one object's support set.
#[derive(Debug, Clone)]
enum Support {
    /// No supporting contacts at all.
    None,
    /// Single point (or coincident points).
    Point(Vec3),
    /// Collinear points: any axis along the line.
    Line(TopplingAxis),
    /// Valid hull axes with their (negative) gravity moments.
    Hull(Vec<(TopplingAxis, f64)>),
}

/// Precomputed per-object data for fast robustness queries.
#[derive(Debug, Clone)]
pub struct ObjectRobustness {
    fixed: bool,
    contacts: Vec<ContactPoint>,
    local: Vec<Vec3>,
    support: Support,
}

impl ObjectRobustness {
    /// `contacts`/`local` are the contacts where the object is the supported
    /// body, with their reactions.
    pub fn new(
        contacts: Vec<ContactPoint>,
        local: Vec<Vec3>,
        mass: f64,
        com: &Vec3,
        gravity: &Vec3,
        fixed: bool,
    ) -> Self {
        let points: Vec<Vec3> = contacts.iter().map(|c| c.position).collect();
        let support = if fixed {
            Support::None
        } else if points.is_empty() {
            Support::None
        } else {
            match toppling_axes(&points) {
                Ok(axes) => Support::Hull(
                    axes.into_iter()
                        .filter(|a| validate_axis(a, &contacts, &local, mass, com, gravity))
                        .map(|a| {
                            let m = a.moment(com, &(gravity * mass));
                            (a, m)
                        })
                        .collect(),
                ),
                Err(_) => {
                    let far = points
                        .iter()
                        .max_by(|a, b| (*a - points[0]).norm().total_cmp(&(*b - points[0]).norm()))
                        .copied()
                        .unwrap();
                    if (far - points[0]).norm() <= 1e-9 {
                        Support::Point(points[0])
                    } else {
                        Support::Line(TopplingAxis { start: points[0], end: far })
                    }
                }
            }
        };
        Self {
            fixed,
            contacts,
            local,
            support,
        }
    }

    /// Builds the data for object `id` from a scene-wide force solution.
    pub fn from_assembly(assembly: &Assembly, forces: &ForceSolution, contacts: &[ContactPoint], id: usize) -> Self {
        let obj = &assembly.objects[id];
        let mut own = Vec::new();
        let mut local = Vec::new();
        for (c, f) in contacts.iter().zip(&forces.local) {
            if c.supported == id {
                own.push(*c);
                local.push(*f);
            }
        }
        Self::new(own, local, obj.object.mass, &obj.world_com(), &assembly.gravity, obj.fixed)
    }

    pub fn slipping(&self, e_hat: &Vec3) -> Robustness {
        if self.fixed {
            return Robustness::INFINITE;
        }
        if self.contacts.is_empty() {
            return Robustness::ZERO;
        }
        slipping_robustness(&self.contacts, &self.local, e_hat)
    }

    pub fn toppling(&self, p: &Vec3, e_hat: &Vec3) -> Robustness {
        if self.fixed {
            return Robustness::INFINITE;
        }
        match &self.support {
            Support::None => Robustness::ZERO,
            Support::Point(k) => {
                if (p - k).cross(e_hat).norm() > MOMENT_EPS {
                    Robustness::ZERO
                } else {
                    Robustness::INFINITE
                }
            }
            Support::Line(axis) => {
                if axis.moment(p, e_hat).abs() > MOMENT_EPS {
                    Robustness::ZERO
                } else {
                    Robustness::INFINITE
                }
            }
            Support::Hull(axes) => axes
                .iter()
                .filter_map(|(axis, gm)| {
                    let push = axis.moment(p, e_hat);
                    (push > MOMENT_EPS).then(|| Robustness::new(-gm / push))
                })
                .min()
                .unwrap_or(Robustness::INFINITE),
        }
    }

    pub fn robustness(&self, p: &Vec3, e_hat: &Vec3) -> Robustness {
        self.slipping(e_hat).min(self.toppling(p, e_hat))
    }
}

/// Toppling robustness of an object with the given supporting contacts.
pub fn toppling_robustness(
    contacts: &[ContactPoint],
    local: &[Vec3],
    mass: f64,
    com: &Vec3,
    gravity: &Vec3,
    e_hat: &Vec3,
    p: &Vec3,
) -> Robustness {
    ObjectRobustness::new(contacts.to_vec(), local.to_vec(), mass, com, gravity, false).toppling(p, e_hat)
}

/// Robustness of object `id` against a push `e_hat` at `p`, using the
/// minimum-norm reaction forces of the whole assembly.
pub fn static_robustness(
    assembly: &Assembly,
    id: usize,
    p: &Vec3,
    e_hat: &Vec3,
) -> Result<Robustness, RobustnessError> {
    if assembly.objects[id].fixed {
        return Ok(Robustness::INFINITE);
    }
    let sys = assembly
        .equilibrium_system()
        .map_err(RobustnessError::NotInEquilibrium)?;
    let forces = solve_reaction_forces_qr(&sys).map_err(RobustnessError::NotInEquilibrium)?;
    let obj = ObjectRobustness::from_assembly(assembly, &forces, &sys.contacts, id);
    Ok(obj.robustness(p, e_hat))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrSample {
    pub position: Vec3,
    /// Outward surface normal; the push acts along its negation.
    pub normal: Vec3,
    pub object: usize,
    pub face: usize,
    /// Owner is a fixed object.
    pub fixed: bool,
    pub robustness: Robustness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrMap {
    pub samples: Vec<SrSample>,
    pub density: f64,
}

impl SrMap {
    /// Smallest robustness over samples on non-fixed objects.
    pub fn min_movable(&self, assembly: &Assembly) -> Robustness {
        self.samples
            .iter()
            .filter(|s| !assembly.objects[s.object].fixed)
            .map(|s| s.robustness)
            .min()
            .unwrap_or(Robustness::INFINITE)
    }
}

fn face_seed(object: usize, face: usize) -> u64 {
    let mut z = ((object as u64) << 32 ^ face as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples every object surface and evaluates the robustness to a push along
/// the inward normal at each sample. Points inside face-to-face contact
/// regions are skipped; fixed objects get infinite robustness.
pub fn compute_sr_map(assembly: &Assembly, density: f64) -> Result<SrMap, RobustnessError> {
    let sys = assembly
        .equilibrium_system()
        .map_err(RobustnessError::NotInEquilibrium)?;
    let forces = solve_reaction_forces_qr(&sys).map_err(RobustnessError::NotInEquilibrium)?;
    let per_object: Vec<ObjectRobustness> = (0..assembly.objects.len())
        .into_par_iter()
        .map(|id| ObjectRobustness::from_assembly(assembly, &forces, &sys.contacts, id))
        .collect();

    let mut sites: Vec<(usize, usize, Vec3)> = Vec::new();
    for (id, obj) in assembly.objects.iter().enumerate() {
        for fi in 0..obj.world.faces.len() {
            let covering: Vec<_> = assembly
                .interfaces
                .iter()
                .filter(|it| match it.faces {
                    Some((fs, fu)) => (it.supporting == id && fs == fi) || (it.supported == id && fu == fi),
                    None => false,
                })
                .collect();
            for p in obj.world.sample_face(fi, density, face_seed(id, fi)) {
                if covering.iter().any(|it| it.region_contains(&p)) {
                    continue;
                }
                sites.push((id, fi, p));
            }
        }
    }
    let samples = sites
        .into_par_iter()
        .map(|(id, fi, p)| {
            let normal = assembly.objects[id].world.faces[fi].normal;
            SrSample {
                position: p,
                normal,
                object: id,
                face: fi,
                fixed: assembly.objects[id].fixed,
                robustness: per_object[id].robustness(&p, &-normal),
            }
        })
        .collect();
    Ok(SrMap { samples, density })
}
