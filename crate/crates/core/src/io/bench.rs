//! Benchmark sweeps over scenes and planner variants, and the bowl scaling sweep.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::planner::{plan_placement, plan_placement_with_map, PlanError, PlannerConfig, Variant};
use crate::pose::StageHistogram;
use crate::robustness::compute_sr_map;

use super::scenes::{bowl, generate_scene, scene_object};
use super::IoError;

/// Bumped whenever the record columns change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema: u32,
    pub scene: String,
    pub variant: String,
    pub seed: u64,
    pub success: bool,
    pub iterations: usize,
    pub wall_ms: f64,
    /// N; empty on failure
    pub min_sr: Option<f64>,
    /// m³; empty on failure
    pub volume: Option<f64>,
    pub no_match: usize,
    pub degenerate_pose: usize,
    pub penetration: usize,
    pub no_contact: usize,
    pub tension_screen: usize,
    pub qp_infeasible: usize,
    pub not_equilibrated: usize,
    /// Set when the run could not start (e.g. the scene is not in equilibrium).
    pub error: String,
}

impl MetricsRecord {
    fn new(scene: &str, variant: Variant, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            scene: scene.to_string(),
            variant: variant.name().to_string(),
            seed,
            success: false,
            iterations: 0,
            wall_ms: 0.0,
            min_sr: None,
            volume: None,
            no_match: 0,
            degenerate_pose: 0,
            penetration: 0,
            no_contact: 0,
            tension_screen: 0,
            qp_infeasible: 0,
            not_equilibrated: 0,
            error: String::new(),
        }
    }

    fn set_histogram(&mut self, h: &StageHistogram) {
        self.no_match = h.no_match;
        self.degenerate_pose = h.degenerate_pose;
        self.penetration = h.penetration;
        self.no_contact = h.no_contact;
        self.tension_screen = h.tension_screen;
        self.qp_infeasible = h.qp_infeasible;
        self.not_equilibrated = h.not_equilibrated;
    }
}

/// One planning run of `variant` on a built-in scene with its default object.
pub fn run_once(scene: &str, variant: Variant, seed: u64, config: &PlannerConfig) -> Result<MetricsRecord, IoError> {
    let assembly = generate_scene(scene)?.build(Path::new("."))?;
    let object = scene_object(scene)?.object(Path::new("."))?;
    let config = PlannerConfig { variant, seed, ..*config };
    let mut rec = MetricsRecord::new(scene, variant, seed);
    let start = Instant::now();
    let outcome = plan_placement(&assembly, &object, &config);
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(res) => {
            rec.success = true;
            rec.iterations = res.iterations;
            rec.min_sr = Some(res.min_sr.value());
            rec.volume = Some(res.volume);
            rec.set_histogram(&res.histogram);
        }
        Err(PlanError::Failure(f)) => {
            rec.iterations = f.iterations;
            rec.set_histogram(&f.histogram);
        }
        Err(e @ PlanError::Robustness(_)) => rec.error = e.to_string(),
    }
    Ok(rec)
}

/// Every (scene, variant, run) cell, run in parallel. Records come back in
/// scene, variant, run order; run `i` uses seed `seed + i`.
pub fn run_benchmark(
    scenes: &[String],
    variants: &[Variant],
    runs: usize,
    seed: u64,
    config: &PlannerConfig,
) -> Result<Vec<MetricsRecord>, IoError> {
    for s in scenes {
        generate_scene(s)?;
    }
    let jobs: Vec<(&str, Variant, u64)> = scenes
        .iter()
        .flat_map(|s| {
            variants
                .iter()
                .flat_map(move |&v| (0..runs as u64).map(move |i| (s.as_str(), v, seed.wrapping_add(i))))
        })
        .collect();
    jobs.par_iter().map(|&(s, v, sd)| run_once(s, v, sd, config)).collect()
}

pub fn write_records<W: Write>(records: &[MetricsRecord], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<MetricsRecord>, IoError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for r in rd.deserialize() {
        let rec: MetricsRecord = r?;
        if rec.schema != SCHEMA_VERSION {
            return Err(IoError::Schema(format!("metrics schema {} (expected {SCHEMA_VERSION})", rec.schema)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Aggregates of one (scene, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scene: String,
    pub variant: String,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_wall_ms: f64,
    pub median_iterations: f64,
    /// Over successful runs with a finite value.
    pub mean_min_sr: Option<f64>,
    pub mean_volume: Option<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Cells in first-appearance order. Failed runs count with their iteration cap.
pub fn summarize(records: &[MetricsRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        let k = (r.scene.clone(), r.variant.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(scene, variant)| {
            let cell: Vec<&MetricsRecord> = records.iter().filter(|r| r.scene == scene && r.variant == variant).collect();
            let ok: Vec<&&MetricsRecord> = cell.iter().filter(|r| r.success).collect();
            let iters: Vec<f64> = cell.iter().map(|r| r.iterations as f64).collect();
            CellSummary {
                runs: cell.len(),
                successes: ok.len(),
                success_rate: ok.len() as f64 / cell.len().max(1) as f64,
                mean_wall_ms: mean(cell.iter().map(|r| r.wall_ms)).unwrap_or(0.0),
                median_iterations: median(&iters),
                mean_min_sr: mean(ok.iter().filter_map(|r| r.min_sr).filter(|x| x.is_finite())),
                mean_volume: mean(ok.iter().filter_map(|r| r.volume)),
                scene,
                variant,
            }
        })
        .collect()
}

pub fn summary_table(cells: &[CellSummary]) -> String {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut out = format!(
        "{:<12} {:<8} {:>5} {:>8} {:>12} {:>10} {:>10} {:>10}\n",
        "scene", "variant", "runs", "success", "mean ms", "med iters", "min SR", "volume"
    );
    for c in cells {
        out.push_str(&format!(
            "{:<12} {:<8} {:>5} {:>7.0}% {:>12.1} {:>10.1} {:>10} {:>10}\n",
            c.scene,
            c.variant,
            c.runs,
            100.0 * c.success_rate,
            c.mean_wall_ms,
            c.median_iterations,
            opt(c.mean_min_sr),
            opt(c.mean_volume)
        ));
    }
    out
}

/// Median timings of one bowl resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityPoint {
    pub requested: usize,
    pub vertices: usize,
    pub sr_ms: f64,
    pub plan_ms: f64,
    pub successes: usize,
}

/// Times the robustness map of `bowl(v)` and the placement search of the
/// default object into it, median over `seeds` seeded runs per size.
pub fn complexity_sweep(vertices: &[usize], seeds: usize, config: &PlannerConfig) -> Result<Vec<ComplexityPoint>, IoError> {
    let object = scene_object("bowl")?.object(Path::new("."))?;
    let mut out = Vec::new();
    for &v in vertices {
        let assembly = bowl(v).build(Path::new("."))?;
        let actual = assembly.objects.iter().find(|o| !o.fixed).map_or(0, |o| o.object.mesh.vertices.len());
        let mut sr = Vec::new();
        let mut plan = Vec::new();
        let mut successes = 0;
        for k in 0..seeds.max(1) {
            let start = Instant::now();
            let map = compute_sr_map(&assembly, config.density).map_err(|e| IoError::Schema(e.to_string()))?;
            sr.push(start.elapsed().as_secs_f64() * 1e3);
            let cfg = PlannerConfig {
                seed: config.seed.wrapping_add(k as u64),
                ..*config
            };
            match plan_placement_with_map(&assembly, &map, &object, &cfg) {
                Ok(res) => {
                    successes += 1;
                    plan.push(res.search_time * 1e3);
                }
                Err(PlanError::Failure(f)) => plan.push(f.wall_time * 1e3),
                Err(e) => return Err(IoError::Schema(e.to_string())),
            }
        }
        out.push(ComplexityPoint {
            requested: v,
            vertices: actual,
            sr_ms: median(&sr),
            plan_ms: median(&plan),
            successes,
        });
    }
    Ok(out)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fitted exponents `(sr_map, plan)` against the actual vertex counts.
pub fn complexity_exponents(points: &[ComplexityPoint]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.vertices as f64).collect();
    let sr: Vec<f64> = points.iter().map(|p| p.sr_ms).collect();
    let plan: Vec<f64> = points.iter().map(|p| p.plan_ms).collect();
    (loglog_slope(&xs, &sr), loglog_slope(&xs, &plan))
}
