use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use srplace::io::bench::{complexity_exponents, complexity_sweep, run_benchmark, summarize, summary_table, write_records};
use srplace::io::export::export_sr_map;
use srplace::assembly::PolyObject;
use srplace::io::scenes::{default_object, generate_scene, scene_object, SCENE_NAMES};
use srplace::io::{load_object, read_scene, save_scene, ObjectSpec, SceneFile};
use srplace::planner::{plan_placement, PlanError, PlannerConfig, Variant};
use srplace::robustness::{compute_sr_map, DEFAULT_DENSITY};

#[derive(Parser)]
#[command(name = "srplace", version, about = "Stable object placement guided by static robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one placement of an object into a scene.
    Plan {
        /// Scene JSON file or built-in scene name.
        scene: String,
        /// Object JSON/OBJ file, or `default` for the scene's own object.
        #[arg(default_value = "default")]
        object: String,
        #[arg(long, default_value = "sr")]
        variant: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// Largest tolerated tension in the least-squares screen, N.
        #[arg(long, default_value_t = 5.0)]
        tension_thresh: f64,
        /// Surface samples per square metre.
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        density: f64,
        /// Writes the scene with the placed object.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the robustness map of a scene.
    Srmap {
        scene: String,
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        density: f64,
        /// PLY point cloud coloured by robustness.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scene × variant cell several times.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "cube,stack,table")]
        scenes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "sr,uniform,chance")]
        variants: Vec<String>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time the bowl at several resolutions and fit scaling exponents.
    Complexity {
        #[arg(long, value_delimiter = ',', default_value = "50,150,500,1500")]
        vertices: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a built-in scene as JSON.
    Gen {
        /// One of cube, stack, pyramids, table, sawteeth, canyon, bowl(v).
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<Variant> {
    Variant::parse(s).with_context(|| format!("unknown variant `{s}` (sr, uniform, chance)"))
}

/// Scene file and the directory its mesh paths are relative to.
fn scene_arg(arg: &str) -> Result<(SceneFile, PathBuf)> {
    let p = Path::new(arg);
    if p.exists() {
        let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((read_scene(p)?, base));
    }
    match generate_scene(arg) {
        Ok(s) => Ok((s, PathBuf::from("."))),
        Err(_) => bail!("no scene file `{arg}` and no built-in scene of that name ({})", SCENE_NAMES.join(", ")),
    }
}

fn object_arg(arg: &str, scene: &str) -> Result<(ObjectSpec, PolyObject)> {
    if arg == "default" {
        let spec = scene_object(scene).unwrap_or_else(|_| default_object("object"));
        let obj = spec.object(Path::new("."))?;
        return Ok((spec, obj));
    }
    Ok(load_object(Path::new(arg))?)
}

/// Returns false when no placement was found.
fn plan(scene_name: &str, object: &str, config: PlannerConfig, out: Option<PathBuf>) -> Result<bool> {
    let (mut scene, base) = scene_arg(scene_name)?;
    let assembly = scene.build(&base)?;
    let (mut spec, obj) = object_arg(object, scene_name)?;
    match plan_placement(&assembly, &obj, &config) {
        Ok(res) => {
            spec.set_pose(&res.pose);
            let min_sr = res.min_sr.value();
            let report = json!({
                "success": true,
                "iterations": res.iterations,
                "wall_ms": res.wall_time * 1e3,
                "rotation": res.pose.quaternion(),
                "translation": [res.pose.translation.x, res.pose.translation.y, res.pose.translation.z],
                "min_sr": if min_sr.is_finite() { json!(min_sr) } else { json!(null) },
                "volume": res.volume,
                "contact": res.kind,
                "histogram": res.histogram,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(path) = out {
                scene.objects.push(spec);
                save_scene(&scene, &path)?;
            }
            Ok(true)
        }
        Err(PlanError::Failure(f)) => {
            let report = json!({
                "success": false,
                "iterations": f.iterations,
                "wall_ms": f.wall_time * 1e3,
                "histogram": f.histogram,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut ok = true;
    match cli.command {
        Command::Plan {
            scene,
            object,
            variant,
            seed,
            max_iters,
            tension_thresh,
            density,
            out,
        } => {
            let mut config = PlannerConfig {
                variant: parse_variant(&variant)?,
                seed,
                max_iterations: max_iters,
                density,
                ..PlannerConfig::default()
            };
            config.validation.tension_threshold = tension_thresh;
            ok = plan(&scene, &object, config, out)?;
        }
        Command::Srmap { scene, density, out } => {
            let (file, base) = scene_arg(&scene)?;
            let assembly = file.build(&base)?;
            let map = compute_sr_map(&assembly, density)?;
            let finite: Vec<f64> = map
                .samples
                .iter()
                .map(|s| s.robustness.value())
                .filter(|r| r.is_finite())
                .collect();
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{} samples, {} finite, range [{lo:.4}, {hi:.4}] N, min over movable {}",
                map.samples.len(),
                finite.len(),
                map.min_movable(&assembly).value()
            );
            if let Some(path) = out {
                export_sr_map(&map, &path)?;
            }
        }
        Command::Bench {
            scenes,
            variants,
            runs,
            seed,
            max_iters,
            csv,
        } => {
            let variants = variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?;
            let config = PlannerConfig {
                max_iterations: max_iters,
                ..PlannerConfig::default()
            };
            let records = run_benchmark(&scenes, &variants, runs, seed, &config)?;
            match csv {
                Some(path) => {
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_records(&records, f)?;
                }
                None => write_records(&records, std::io::stdout().lock())?,
            }
            eprint!("{}", summary_table(&summarize(&records)));
        }
        Command::Complexity { vertices, seeds, seed } => {
            let config = PlannerConfig {
                seed,
                ..PlannerConfig::default()
            };
            let points = complexity_sweep(&vertices, seeds, &config)?;
            println!("{:>9} {:>9} {:>12} {:>12} {:>9}", "requested", "vertices", "srmap ms", "plan ms", "placed");
            for p in &points {
                println!(
                    "{:>9} {:>9} {:>12.2} {:>12.2} {:>9}",
                    p.requested, p.vertices, p.sr_ms, p.plan_ms, p.successes
                );
            }
            let (sr, plan) = complexity_exponents(&points);
            println!("srmap exponent {sr:.3}, plan exponent {plan:.3}");
        }
        Command::Gen { name, out } => {
            let scene = generate_scene(&name)?;
            save_scene(&scene, &out)?;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
