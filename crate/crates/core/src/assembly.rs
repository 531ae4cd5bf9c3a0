//! Scenes of rigid polyhedral objects and their contacts.

use std::sync::Arc;

use crate::contact::{find_interfaces, ContactInterface};
use crate::geometry::{Aabb, PolyMesh, Pose, Vec3};
use crate::statics::{build_equilibrium_system, Body, ContactPoint, EquilibriumSystem, StaticsError};

/// Default distance below which surfaces are considered touching (m).
pub const CONTACT_TOL: f64 = 1e-4;

/// Rigid object description in its own frame.
#[derive(Debug, Clone)]
pub struct PolyObject {
    pub name: String,
    pub mesh: Arc<PolyMesh>,
    /// kg
    pub mass: f64,
    /// Centre of mass in the object frame.
    pub com: Vec3,
    pub mu: f64,
}

impl PolyObject {
    /// Object of uniform density with its centre of mass at the volume centroid.
    pub fn uniform(name: impl Into<String>, mesh: PolyMesh, mass: f64, mu: f64) -> Self {
        let com = mesh.volume_centroid();
        Self {
            name: name.into(),
            mesh: Arc::new(mesh),
            mass,
            com,
            mu,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlacedObject {
    pub object: PolyObject,
    pub pose: Pose,
    pub fixed: bool,
    /// Mesh in world coordinates.
    pub world: Arc<PolyMesh>,
}

impl PlacedObject {
    pub fn new(object: PolyObject, pose: Pose, fixed: bool) -> Self {
        let world = Arc::new(object.mesh.transformed(&pose));
        Self {
            object,
            pose,
            fixed,
            world,
        }
    }

    pub fn world_com(&self) -> Vec3 {
        self.pose.transform_point(&self.object.com)
    }
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub objects: Vec<PlacedObject>,
    pub gravity: Vec3,
    pub interfaces: Vec<ContactInterface>,
    pub contact_tol: f64,
}

impl Assembly {
    pub fn new(gravity: Vec3) -> Self {
        Self {
            objects: Vec::new(),
            gravity,
            interfaces: Vec::new(),
            contact_tol: CONTACT_TOL,
        }
    }

    /// Unit vector against gravity (world z when gravity is zero).
    pub fn up(&self) -> Vec3 {
        let n = self.gravity.norm();
        if n == 0.0 {
            Vec3::z()
        } else {
            -self.gravity / n
        }
    }

    /// Adds an object and detects its contacts with every object already present.
    pub fn add_object(&mut self, object: PolyObject, pose: Pose, fixed: bool) -> usize {
        let placed = PlacedObject::new(object, pose, fixed);
        let interfaces = self.interfaces_with(&placed);
        self.push(placed, interfaces)
    }

    /// Contact interfaces between a prospective object and the current objects.
    pub fn interfaces_with(&self, placed: &PlacedObject) -> Vec<ContactInterface> {
        let id = self.objects.len();
        let up = self.up();
        let mut out = Vec::new();
        for (i, other) in self.objects.iter().enumerate() {
            out.extend(find_interfaces(i, other, id, placed, &up, self.contact_tol));
        }
        out
    }

    /// Appends an object with precomputed interfaces; returns its id.
    pub fn push(&mut self, placed: PlacedObject, interfaces: Vec<ContactInterface>) -> usize {
        self.objects.push(placed);
        self.interfaces.extend(interfaces);
        self.objects.len() - 1
    }

    pub fn contacts(&self) -> Vec<ContactPoint> {
        self.interfaces.iter().flat_map(|i| i.contact_points()).collect()
    }

    pub fn bodies(&self) -> Vec<Body> {
        self.objects
            .iter()
            .map(|o| Body {
                mass: o.object.mass,
                com: o.world_com(),
                fixed: o.fixed,
            })
            .collect()
    }

    pub fn equilibrium_system(&self) -> Result<EquilibriumSystem, StaticsError> {
        build_equilibrium_system(&self.bodies(), &self.contacts(), &self.gravity)
    }

    pub fn movable_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.objects.len()).filter(|&i| !self.objects[i].fixed)
    }

    /// Bounding box of the non-fixed objects, or of everything when all are fixed.
    pub fn working_aabb(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for o in self.objects.iter().filter(|o| !o.fixed) {
            bb = bb.merge(&o.world.aabb);
        }
        if bb.min.x > bb.max.x {
            for o in &self.objects {
                bb = bb.merge(&o.world.aabb);
            }
        }
        bb
    }
}
