//! Built-in scenes. Every generator is deterministic; sizes are in metres,
//! masses in kilograms, and every surface has friction 0.5.

use super::{IoError, MeshSource, ObjectSpec, SceneFile};

pub const SCENE_NAMES: [&str; 7] = ["cube", "stack", "pyramids", "table", "sawteeth", "canyon", "bowl"];

/// Vertex budget of `bowl` when none is given.
pub const DEFAULT_BOWL_VERTICES: usize = 150;

const MU: f64 = 0.5;

fn cuboid(name: &str, extents: [f64; 3], mass: f64) -> ObjectSpec {
    ObjectSpec::new(name, MeshSource::Box { extents }, mass, MU)
}

/// Fixed 4 × 4 m slab whose top is z = 0.
pub fn floor() -> ObjectSpec {
    cuboid("floor", [4.0, 4.0, 0.2], 0.0).at([0.0, 0.0, -0.1]).fixed()
}

/// The object planned into a scene when no other is given: a 0.4 m cube of 1 kg.
pub fn default_object(name: &str) -> ObjectSpec {
    cuboid(name, [0.4, 0.4, 0.4], 1.0)
}

/// Object used with each built-in scene, sized so the scene's challenge applies to it.
pub fn scene_object(scene: &str) -> Result<ObjectSpec, IoError> {
    let (base, _) = parse_name(scene)?;
    Ok(match base {
        // must span the canyon gap
        "canyon" => cuboid("object", [0.6, 0.6, 0.6], 1.0),
        // must fit on a single pyramid face or tooth
        "pyramids" | "sawteeth" => cuboid("object", [0.3, 0.3, 0.3], 1.0),
        _ => default_object("object"),
    })
}

/// Assorted blocks for placement sequences, heavy to light.
pub fn block_set() -> Vec<ObjectSpec> {
    vec![
        cuboid("block_a", [0.4, 0.3, 0.2], 1.2),
        cuboid("block_b", [0.3, 0.3, 0.3], 1.0),
        cuboid("block_c", [0.5, 0.2, 0.1], 0.6),
        cuboid("block_d", [0.2, 0.2, 0.35], 0.7),
        ObjectSpec::new(
            "wedge",
            MeshSource::Extrusion {
                profile: vec![[-0.15, 0.0], [0.15, 0.0], [-0.15, 0.2]],
                depth: 0.25,
            },
            0.4,
            MU,
        ),
    ]
}

/// A single 1 m cube on the floor: one large top face, every other movable
/// surface vertical.
pub fn cube() -> SceneFile {
    SceneFile::new(vec![floor(), cuboid("cube", [1.0, 1.0, 1.0], 1.0).at([0.0, 0.0, 0.5])])
}

/// Three 1.2 × 1.2 × 0.6 blocks stacked with small offsets. Most of the surface
/// is vertical, so most sampled points cannot carry an object.
pub fn stack() -> SceneFile {
    let offsets = [[0.0, 0.0], [0.12, -0.08], [0.04, 0.1]];
    let mut objects = vec![floor()];
    for (i, [x, y]) in offsets.into_iter().enumerate() {
        objects.push(cuboid(&format!("block{i}"), [1.2, 1.2, 0.6], 2.0).at([x, y, 0.3 + 0.6 * i as f64]));
    }
    SceneFile::new(objects)
}

/// Four low square pyramids side by side. There is no horizontal movable
/// surface; objects rest on slopes through friction alone.
pub fn pyramids() -> SceneFile {
    let mut objects = vec![floor()];
    for (i, (x, y)) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)].into_iter().enumerate() {
        objects.push(
            ObjectSpec::new(format!("pyramid{i}"), MeshSource::Pyramid { base: 1.0, height: 0.2 }, 1.5, MU).at([x, y, 0.0]),
        );
    }
    SceneFile::new(objects)
}

/// Four thin 1 m legs carrying a loose tabletop. Everything is movable, so
/// pushes on the legs or near the table's edge topple it.
pub fn table() -> SceneFile {
    let mut objects = vec![floor()];
    for (i, (x, y)) in [(-0.8, -0.6), (0.8, -0.6), (-0.8, 0.6), (0.8, 0.6)].into_iter().enumerate() {
        objects.push(cuboid(&format!("leg{i}"), [0.1, 0.1, 1.0], 0.5).at([x, y, 0.5]));
    }
    objects.push(cuboid("top", [1.8, 1.4, 0.1], 3.0).at([0.0, 0.0, 1.05]));
    SceneFile::new(objects)
}

/// Three teeth on a band that stands on the tips of its zig-zag underside.
/// The upper faces rise at 22° and drop vertically, so nothing is horizontal:
/// an object rests on a slope by friction or against a step.
pub fn sawteeth() -> SceneFile {
    let s = 0.5;
    let profile: Vec<[f64; 2]> = [
        (0.0, 0.0),
        (0.5, 0.3),
        (1.0, 0.0),
        (1.5, 0.3),
        (2.0, 0.0),
        (2.5, 0.3),
        (3.0, 0.0),
        (3.0, 1.4),
        (2.0, 1.0),
        (2.0, 1.4),
        (1.0, 1.0),
        (1.0, 1.4),
        (0.0, 1.0),
    ]
    .into_iter()
    .map(|(x, z)| [(x - 1.5) * s, z * s])
    .collect();
    SceneFile::new(vec![
        floor(),
        ObjectSpec::new("sawteeth", MeshSource::Extrusion { profile, depth: 1.0 }, 2.0, MU),
    ])
}

/// Two T-section blocks (0.15 m cap on a 0.06 m stem) inside a fixed
/// channel whose walls end in sharp ridges. The 0.6 m object fits neither
/// into the 0.5 m gap between the caps nor onto a single cap, even leaning on
/// a wall with friction, so it can only rest on both blocks at once. The
/// narrow stems make every block side easy to topple.
pub fn canyon() -> SceneFile {
    let (cap, stem, lip, height) = (0.15, 0.06, 0.06, 0.35);
    let (gap, clearance, wall) = (0.5, 0.05, 0.2);
    let inner = gap / 2.0 + cap + clearance;
    let channel = vec![
        [-inner - wall, -0.2],
        [inner + wall, -0.2],
        [inner + wall, 1.0],
        [inner + wall / 2.0, 1.1],
        [inner, 1.0],
        [inner, 0.0],
        [-inner, 0.0],
        [-inner, 1.0],
        [-inner - wall / 2.0, 1.1],
        [-inner - wall, 1.0],
    ];
    let block = |x: f64| MeshSource::Extrusion {
        profile: vec![
            [x - stem / 2.0, 0.0],
            [x + stem / 2.0, 0.0],
            [x + stem / 2.0, height - lip],
            [x + cap / 2.0, height - lip],
            [x + cap / 2.0, height],
            [x - cap / 2.0, height],
            [x - cap / 2.0, height - lip],
            [x - stem / 2.0, height - lip],
        ],
        depth: 0.8,
    };
    let x = gap / 2.0 + cap / 2.0;
    SceneFile::new(vec![
        ObjectSpec::new("channel", MeshSource::Extrusion { profile: channel, depth: 2.0 }, 0.0, MU).fixed(),
        ObjectSpec::new("left", block(-x), 1.0, MU),
        ObjectSpec::new("right", block(x), 1.0, MU),
    ])
}

/// A 1 m bowl, a thin shell with a flat base, at roughly `vertices` vertices.
/// Only its tessellation changes with the budget.
pub fn bowl(vertices: usize) -> SceneFile {
    SceneFile::new(vec![
        floor(),
        ObjectSpec::new(
            "bowl",
            MeshSource::Bowl {
                outer_radius: 1.0,
                thickness: 0.08,
                depth: 0.6,
                vertices,
            },
            2.0,
            MU,
        ),
    ])
}

/// Splits `bowl(150)`, `bowl:150` or `bowl150` into name and vertex budget.
fn parse_name(name: &str) -> Result<(&str, Option<usize>), IoError> {
    let unknown = || IoError::UnknownScene(name.to_string());
    let trimmed = name.trim();
    if let Some(rest) = trimmed.strip_prefix("bowl") {
        let digits = rest.trim_start_matches(['(', ':']).trim_end_matches(')');
        if digits.is_empty() {
            return Ok(("bowl", None));
        }
        let v: usize = digits.parse().map_err(|_| unknown())?;
        return Ok(("bowl", Some(v)));
    }
    SCENE_NAMES
        .iter()
        .find(|&&n| n == trimmed)
        .map(|&n| (n, None))
        .ok_or_else(unknown)
}

pub fn generate_scene(name: &str) -> Result<SceneFile, IoError> {
    let (base, v) = parse_name(name)?;
    Ok(match base {
        "cube" => cube(),
        "stack" => stack(),
        "pyramids" => pyramids(),
        "table" => table(),
        "sawteeth" => sawteeth(),
        "canyon" => canyon(),
        "bowl" => bowl(v.unwrap_or(DEFAULT_BOWL_VERTICES)),
        _ => unreachable!(),
    })
}
