//! Scene files, built-in scenes, robustness export and benchmarks.

pub mod bench;
pub mod export;
pub mod scenes;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Assembly, PolyObject};
use crate::geometry::mesh::load_obj;
use crate::geometry::primitives::{bowl_mesh, box_mesh, extrude_xz, pyramid_mesh, sphere_mesh};
use crate::geometry::{GeometryError, PolyMesh, Pose, Vec3};

/// Allowed deviation of a stored quaternion from unit norm.
pub const QUATERNION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Schema(String),
    #[error("mesh {name}: {source}")]
    Mesh {
        name: String,
        #[source]
        source: GeometryError,
    },
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where an object's mesh comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    /// Centred box.
    Box { extents: [f64; 3] },
    Sphere { radius: f64, rings: usize, segments: usize },
    Bowl {
        outer_radius: f64,
        thickness: f64,
        depth: f64,
        vertices: usize,
    },
    /// Square pyramid standing on z = 0.
    Pyramid { base: f64, height: f64 },
    /// Counter-clockwise x–z polygon extruded along y.
    Extrusion { profile: Vec<[f64; 2]>, depth: f64 },
    /// Wavefront OBJ, relative to the scene file's directory.
    File { path: String },
}

impl MeshSource {
    pub fn build(&self, base: &Path) -> Result<PolyMesh, GeometryError> {
        if let Some(msg) = self.invalid() {
            return Err(GeometryError::InvalidMesh(msg));
        }
        Ok(match self {
            MeshSource::Box { extents } => box_mesh(Vec3::from(*extents)),
            MeshSource::Sphere { radius, rings, segments } => sphere_mesh(*radius, *rings, *segments),
            MeshSource::Bowl {
                outer_radius,
                thickness,
                depth,
                vertices,
            } => bowl_mesh(*outer_radius, *thickness, *depth, *vertices),
            MeshSource::Pyramid { base: b, height } => pyramid_mesh(*b, *height),
            MeshSource::Extrusion { profile, depth } => {
                let poly: Vec<(f64, f64)> = profile.iter().map(|p| (p[0], p[1])).collect();
                extrude_xz(&poly, *depth)
            }
            MeshSource::File { path } => {
                let p = Path::new(path);
                let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                load_obj(&full)?
            }
        })
    }

    fn invalid(&self) -> Option<String> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            MeshSource::Box { extents } if !extents.iter().all(|&e| pos(e)) => Some("box extents must be positive".into()),
            MeshSource::Sphere { radius, rings, segments } if !pos(*radius) || *rings < 2 || *segments < 3 => {
                Some("sphere needs a positive radius, 2+ rings and 3+ segments".into())
            }
            MeshSource::Bowl {
                outer_radius,
                thickness,
                depth,
                vertices,
            } if !pos(*outer_radius) || !pos(*thickness) || !pos(*depth) || thickness >= depth || depth > outer_radius || *vertices < 8 => {
                Some("bad bowl parameters".into())
            }
            MeshSource::Pyramid { base, height } if !pos(*base) || !pos(*height) => Some("bad pyramid parameters".into()),
            MeshSource::Extrusion { profile, depth } if profile.len() < 3 || !pos(*depth) => Some("extrusion needs 3+ profile points".into()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub mesh: MeshSource,
    /// Unit quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    /// kg
    pub mass: f64,
    /// Object-frame centre of mass; the volume centroid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub com: Option<[f64; 3]>,
    pub mu: f64,
    #[serde(default)]
    pub fixed: bool,
}

impl ObjectSpec {
    /// Unplaced object with uniform density.
    pub fn new(name: impl Into<String>, mesh: MeshSource, mass: f64, mu: f64) -> Self {
        Self {
            name: name.into(),
            mesh,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
            mass,
            com: None,
            mu,
            fixed: false,
        }
    }

    pub fn at(mut self, translation: [f64; 3]) -> Self {
        self.translation = translation;
        self
    }

    pub fn fixed(mut self) -> Self {
        self.fixed = true;
        self
    }

    pub fn pose(&self) -> Result<Pose, IoError> {
        let q = self.rotation;
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !n.is_finite() || (n - 1.0).abs() > QUATERNION_TOL {
            return Err(IoError::Schema(format!(
                "object `{}`: quaternion norm {n} is not 1",
                self.name
            )));
        }
        if self.translation.iter().any(|x| !x.is_finite()) {
            return Err(IoError::Schema(format!("object `{}`: non-finite translation", self.name)));
        }
        Ok(Pose::from_quaternion(q, Vec3::from(self.translation)))
    }

    pub fn set_pose(&mut self, pose: &Pose) {
        self.rotation = pose.quaternion();
        self.translation = pose.translation.into();
    }

    /// Object description (mesh in its own frame).
    pub fn object(&self, base: &Path) -> Result<PolyObject, IoError> {
        if !self.fixed && !(self.mass > 0.0) {
            return Err(IoError::Schema(format!("object `{}`: mass must be positive", self.name)));
        }
        if !(self.mu >= 0.0) {
            return Err(IoError::Schema(format!("object `{}`: negative friction", self.name)));
        }
        let mesh = self.mesh.build(base).map_err(|source| IoError::Mesh {
            name: self.name.clone(),
            source,
        })?;
        let mut obj = PolyObject::uniform(self.name.clone(), mesh, self.mass.max(0.0), self.mu);
        if let Some(c) = self.com {
            obj.com = Vec3::from(c);
        }
        Ok(obj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    /// m/s²
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    pub objects: Vec<ObjectSpec>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

impl SceneFile {
    pub fn new(objects: Vec<ObjectSpec>) -> Self {
        Self {
            gravity: default_gravity(),
            objects,
        }
    }

    /// Builds the assembly, resolving mesh files against `base`.
    pub fn build(&self, base: &Path) -> Result<Assembly, IoError> {
        let mut asm = Assembly::new(Vec3::from(self.gravity));
        for spec in &self.objects {
            let pose = spec.pose()?;
            asm.add_object(spec.object(base)?, pose, spec.fixed);
        }
        Ok(asm)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn read_scene(path: &Path) -> Result<SceneFile, IoError> {
    SceneFile::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn save_scene(scene: &SceneFile, path: &Path) -> Result<(), IoError> {
    fs::write(path, scene.to_json()).map_err(io_err(path))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a scene file and builds its assembly.
pub fn load_scene(path: &Path) -> Result<Assembly, IoError> {
    read_scene(path)?.build(&base_dir(path))
}

/// Reads an object: a JSON object description, or an OBJ mesh with unit mass
/// and friction 0.5.
pub fn load_object(path: &Path) -> Result<(ObjectSpec, PolyObject), IoError> {
    let base = base_dir(path);
    let spec = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")) {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        ObjectSpec::new(name, MeshSource::File { path: file }, 1.0, 0.5)
    } else {
        serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?
    };
    let obj = spec.object(&base)?;
    Ok((spec, obj))
}
