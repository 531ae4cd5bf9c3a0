//! Contact-first placement loop and its variants.

use std::time::Instant;

use nalgebra::{Matrix3, SymmetricEigen, UnitQuaternion, Quaternion};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Assembly, PolyObject};
use crate::contact::ContactInterface;
use crate::geometry::{Pose, Vec3};
use crate::matching::{
    choose_feature_pair, enumerate_feature_pairs, match_features, ObjectFeatures, PairKind, SceneContactSample,
};
use crate::pose::{
    determine_pose, validate_pose, StageCounters, StageHistogram, ValidatedPlacement, ValidationConfig,
};
use crate::robustness::{compute_sr_map, Robustness, RobustnessError, SrMap, DEFAULT_DENSITY};
use crate::sampling::{init_q0, point_probabilities, sample_pair, SamplerState};
use crate::statics::ForceSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    SrWeighted,
    Uniform,
    Chance,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SrWeighted, Variant::Uniform, Variant::Chance];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SrWeighted => "sr",
            Variant::Uniform => "uniform",
            Variant::Chance => "chance",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "sr" | "srweighted" | "sr-weighted" => Some(Variant::SrWeighted),
            "uniform" => Some(Variant::Uniform),
            "chance" => Some(Variant::Chance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub max_iterations: usize,
    pub validation: ValidationConfig,
    /// Initial share of the most robust finite sample.
    pub q0_target: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Surface samples per m² for the robustness map.
    pub density: f64,
    pub variant: Variant,
    pub seed: u64,
    pub allow_fixed_support: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            validation: ValidationConfig::default(),
            q0_target: 0.1,
            lambda: 0.99,
            gamma: 0.5,
            density: DEFAULT_DENSITY,
            variant: Variant::SrWeighted,
            seed: 0,
            allow_fixed_support: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlacementResult {
    pub pose: Pose,
    pub interfaces: Vec<ContactInterface>,
    pub forces: ForceSolution,
    pub iterations: usize,
    /// s, including the robustness map of the result
    pub wall_time: f64,
    /// s spent sampling and validating
    pub search_time: f64,
    pub min_sr: Robustness,
    /// m³
    pub volume: f64,
    pub kind: Option<PairKind>,
    pub histogram: StageHistogram,
    pub assembly: Assembly,
    /// Robustness map of the updated assembly.
    pub sr_map: SrMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFailure {
    pub iterations: usize,
    pub histogram: StageHistogram,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Error)]
pub enum PlanError {
    #[error("no valid placement after {} iterations", .0.iterations)]
    Failure(PlanFailure),
    #[error("assembly is not in equilibrium: {0}")]
    Robustness(#[from] RobustnessError),
}

fn box_volume(points: &[Vec3], frame: &Matrix3<f64>) -> f64 {
    let mut vol = 1.0;
    for k in 0..3 {
        let axis = frame.column(k).into_owned();
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let t = p.dot(&axis);
            (lo.min(t), hi.max(t))
        });
        vol *= hi - lo;
    }
    vol
}

/// Smallest box volume over the principal axes of `points` and the extra
/// orthonormal `frames` (the principal axes are arbitrary for isotropic sets).
pub fn obb_volume(points: &[Vec3], frames: &[Matrix3<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    frames
        .iter()
        .map(|f| box_volume(points, f))
        .fold(box_volume(points, &eig.eigenvectors), f64::min)
}

/// Oriented bounding-box volume of the non-fixed objects, trying the
/// principal axes, the world axes and every object's own axes.
pub fn assembly_volume(assembly: &Assembly) -> f64 {
    let movable = assembly.objects.iter().filter(|o| !o.fixed);
    let pts: Vec<Vec3> = movable.clone().flat_map(|o| o.world.vertices.iter().copied()).collect();
    let mut frames = vec![Matrix3::identity()];
    frames.extend(movable.map(|o| o.pose.rotation));
    obb_volume(&pts, &frames)
}

fn scene_sample(map: &SrMap, i: usize) -> SceneContactSample {
    let s = &map.samples[i];
    SceneContactSample {
        position: s.position,
        normal: s.normal,
        object: s.object,
        face: s.face,
    }
}

/// Equal weights over the samples the robustness-weighted sampler may draw.
fn uniform_probabilities(map: &SrMap, allow_fixed: bool) -> Vec<f64> {
    let any_movable = map.samples.iter().any(|s| !s.fixed);
    let w: Vec<f64> = map
        .samples
        .iter()
        .map(|s| if !s.fixed || allow_fixed || !any_movable { 1.0 } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total.max(1e-300)).collect()
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let q = Quaternion::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix();
        }
    }
}

struct Accepted {
    placement: ValidatedPlacement,
    kind: Option<PairKind>,
    iterations: usize,
}

fn search(
    assembly: &Assembly,
    map: &SrMap,
    object: &PolyObject,
    config: &PlannerConfig,
    counters: &StageCounters,
) -> Option<Accepted> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let features = ObjectFeatures::new(&object.mesh);
    let bb = assembly.working_aabb();
    let mut state = SamplerState::new(
        init_q0(map, config.q0_target),
        config.lambda,
        config.gamma,
        (0.5 * bb.extents().norm()).max(1e-6),
        bb.center(),
    );
    state.allow_fixed_support = config.allow_fixed_support;
    let uniform = uniform_probabilities(map, config.allow_fixed_support);
    let reach = object.mesh.radius_about(&object.com);
    let chance_box = bb.inflated(reach);

    for k in 0..config.max_iterations {
        let iterations = k + 1;
        if config.variant == Variant::Chance {
            let u = Vec3::new(rng.random(), rng.random(), rng.random());
            let c = chance_box.min + chance_box.extents().component_mul(&u);
            let rot = random_rotation(&mut rng);
            let pose = Pose::new(rot, c - rot * object.com);
            if let Ok(placement) = validate_pose(object, &pose, assembly, &config.validation, counters) {
                return Some(Accepted { placement, kind: None, iterations });
            }
            continue;
        }
        let probs = match config.variant {
            Variant::Uniform => uniform.clone(),
            _ => match point_probabilities(map, &state) {
                Ok(p) => p,
                Err(_) => return None,
            },
        };
        state.advance();
        let Ok((i, j)) = sample_pair(&probs, &mut rng) else {
            return None;
        };
        let a = scene_sample(map, i);
        let b = scene_sample(map, j);
        let length = (a.position - b.position).norm();
        let pairs = if length > 1e-9 {
            enumerate_feature_pairs(&object.mesh, &features, &a, &b)
        } else {
            Vec::new()
        };
        let Some((first, second)) = choose_feature_pair(&pairs, &mut rng) else {
            counters.no_match.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            continue;
        };
        let Ok(m) = match_features(&object.mesh, &features, first, second, &object.com, length) else {
            counters.no_match.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            continue;
        };
        let n1 = first.normal(&object.mesh);
        let n2 = second.normal(&object.mesh);
        // anchored on either scene point
        let poses = [
            determine_pose(&a.position, &b.position, &a.normal, &m.q, &m.r, &n1),
            determine_pose(&b.position, &a.position, &b.normal, &m.r, &m.q, &n2),
        ];
        for pose in poses {
            match pose {
                Err(_) => {
                    counters.degenerate_pose.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
                Ok(pose) => {
                    if let Ok(placement) = validate_pose(object, &pose, assembly, &config.validation, counters) {
                        return Some(Accepted { placement, kind: Some(m.kind), iterations });
                    }
                }
            }
        }
    }
    None
}

/// Plans one placement against a precomputed robustness map of `assembly`.
pub fn plan_placement_with_map(
    assembly: &Assembly,
    map: &SrMap,
    object: &PolyObject,
    config: &PlannerConfig,
) -> Result<PlacementResult, PlanError> {
    let start = Instant::now();
    let counters = StageCounters::default();
    match search(assembly, map, object, config, &counters) {
        Some(acc) => {
            let search_time = start.elapsed().as_secs_f64();
            let sr_map = compute_sr_map(&acc.placement.assembly, config.density)?;
            let min_sr = sr_map.min_movable(&acc.placement.assembly);
            let volume = assembly_volume(&acc.placement.assembly);
            Ok(PlacementResult {
                pose: acc.placement.pose,
                interfaces: acc.placement.interfaces,
                forces: acc.placement.forces,
                iterations: acc.iterations,
                wall_time: start.elapsed().as_secs_f64(),
                search_time,
                min_sr,
                volume,
                kind: acc.kind,
                histogram: counters.snapshot(),
                assembly: acc.placement.assembly,
                sr_map,
            })
        }
        None => Err(PlanError::Failure(PlanFailure {
            iterations: config.max_iterations,
            histogram: counters.snapshot(),
            wall_time: start.elapsed().as_secs_f64(),
        })),
    }
}

/// Computes the robustness map of `assembly` and plans one placement.
pub fn plan_placement(assembly: &Assembly, object: &PolyObject, config: &PlannerConfig) -> Result<PlacementResult, PlanError> {
    let map = compute_sr_map(assembly, config.density)?;
    plan_placement_with_map(assembly, &map, object, config)
}

/// `plan_placement` with the variant overridden.
pub fn run_variant(
    variant: Variant,
    assembly: &Assembly,
    object: &PolyObject,
    config: &PlannerConfig,
) -> Result<PlacementResult, PlanError> {
    let config = PlannerConfig { variant, ..*config };
    plan_placement(assembly, object, &config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceOrder {
    Given,
    /// Next object drawn with odds proportional to its mass.
    MassWeighted,
}

/// Random permutation where each next index is drawn among the remaining
/// ones with probability proportional to its mass.
pub fn mass_weighted_order<R: Rng + ?Sized>(masses: &[f64], rng: &mut R) -> Vec<usize> {
    let mut left: Vec<usize> = (0..masses.len()).collect();
    let mut out = Vec::with_capacity(masses.len());
    while !left.is_empty() {
        let w: Vec<f64> = left.iter().map(|&i| masses[i].max(0.0)).collect();
        let pick = match WeightedIndex::new(&w) {
            Ok(d) => d.sample(rng),
            Err(_) => 0,
        };
        out.push(left.remove(pick));
    }
    out
}

/// One sequence step: the object index and its outcome.
#[derive(Debug)]
pub struct SequenceStep {
    pub object: usize,
    pub outcome: Result<PlacementResult, PlanError>,
}

/// Places objects one after another, each against everything placed before.
/// A failed object is recorded and skipped.
pub fn plan_sequence(
    scene: &Assembly,
    objects: &[PolyObject],
    order: SequenceOrder,
    config: &PlannerConfig,
) -> Vec<SequenceStep> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_0F_5E9);
    let sequence = match order {
        SequenceOrder::Given => (0..objects.len()).collect(),
        SequenceOrder::MassWeighted => {
            let masses: Vec<f64> = objects.iter().map(|o| o.mass).collect();
            mass_weighted_order(&masses, &mut rng)
        }
    };
    let mut current = scene.clone();
    let mut map = match compute_sr_map(&current, config.density) {
        Ok(m) => m,
        Err(e) => {
            return sequence
                .into_iter()
                .map(|i| SequenceStep {
                    object: i,
                    outcome: Err(PlanError::Robustness(e.clone())),
                })
                .collect()
        }
    };
    let mut steps = Vec::with_capacity(sequence.len());
    for (n, &i) in sequence.iter().enumerate() {
        let cfg = PlannerConfig {
            seed: config.seed.wrapping_add(n as u64),
            ..*config
        };
        let outcome = plan_placement_with_map(&current, &map, &objects[i], &cfg);
        if let Ok(res) = &outcome {
            current = res.assembly.clone();
            map = res.sr_map.clone();
        }
        steps.push(SequenceStep { object: i, outcome });
    }
    steps
}
