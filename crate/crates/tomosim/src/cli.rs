//! Command-line front end. Every subcommand reads the TOML config plus its
//! flags, writes its artifacts, and prints a single machine-readable JSON
//! summary line on stdout; diagnostics go to stderr. Exit codes: 0 success,
//! 1 validation error, 2 I/O error, 64 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{Config, ConfigError};
use crate::io::{self, DepthUnits, IoError};
use crate::optics::OpticsError;
use crate::perception::PerceptionError;
use crate::render::{
    self, build_subframe_schedule, quantize_depth, HdrOptions, RenderError, RgbdScene, Waveform,
};
use crate::sim::{self, ContrastReduction, SimError};
use crate::strategy::{self, optimize_ga, StrategyError, StrategyTable, TableFormatError};

#[derive(Parser)]
#[command(
    name = "tomosim",
    version,
    about = "Tomographic display simulation and optimization toolkit"
)]
struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all stochastic operations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the internal pool (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the illumination strategy for one target depth.
    Optimize {
        #[arg(long)]
        target_depth: f64,
        #[arg(long, default_value = "strategy.json")]
        out: PathBuf,
        /// Write the GA convergence trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build the full per-layer strategy table.
    Table {
        #[arg(long, default_value = "table.bin")]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compile an RGB-D scene into a backlight mask sequence.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "sequence")]
        out: PathBuf,
        /// Override the configured waveform (ramp | triangle).
        #[arg(long)]
        waveform: Option<String>,
    },
    /// Render with per-pixel illumination-time scaling (0.5x-1.5x).
    Hdr {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        table: PathBuf,
        /// Grayscale PNG mapped linearly onto the 0.5x-1.5x range.
        #[arg(long)]
        intensity: PathBuf,
        #[arg(long, default_value = "sequence_hdr")]
        out: PathBuf,
        #[arg(long)]
        waveform: Option<String>,
    },
    /// Bias a depth map against the configured field curvature.
    Precompensate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, default_value = "depth_precompensated.pfm")]
        out: PathBuf,
    },
    /// Simulate a focal stack from a backlight sequence directory.
    Simulate {
        #[arg(long)]
        seq: PathBuf,
        /// Comma-separated accommodation depths in diopters.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<f64>>,
        #[arg(long, default_value = "stack")]
        out: PathBuf,
    },
    /// Contrast map of a strategy table, with the ideal-reference error map.
    Contrast {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "contrast.png")]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        error_png: Option<PathBuf>,
        #[arg(long)]
        error_csv: Option<PathBuf>,
    },
    /// Emit the subframe-to-layer schedule as JSON.
    Schedule {
        #[arg(long)]
        waveform: Option<String>,
        #[arg(long, default_value = "schedule.json")]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Table(#[from] TableFormatError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Table(_) | CliError::File { .. } => 2,
            CliError::Config(ConfigError::Io { .. }) => 2,
            _ => 1,
        }
    }
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    64
                }
            };
        }
    };

    if let Some(workers) = cli.workers {
        // ignored if a global pool already exists (e.g. repeated in-process runs)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }

    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            println!(
                "{}",
                json!({"status": "error", "message": err.to_string()})
            );
            err.exit_code()
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, CliError> {
    match path {
        Some(p) => Ok(Config::from_path(p)?),
        None => Ok(Config::default()),
    }
}

fn parse_waveform(flag: &Option<String>, config: &Config) -> Result<Waveform, CliError> {
    match flag.as_deref() {
        None => Ok(config.waveform()?),
        Some("ramp") => Ok(Waveform::Ramp),
        Some("triangle") => Ok(Waveform::Triangle),
        Some(other) => Err(CliError::Validation(format!(
            "waveform must be ramp or triangle, got {other:?}"
        ))),
    }
}

fn depth_units(config: &Config) -> Result<DepthUnits, CliError> {
    match config.render.depth_units.as_str() {
        "diopters" => Ok(DepthUnits::Diopters),
        "meters" => Ok(DepthUnits::Meters),
        other => Err(CliError::Validation(format!(
            "render.depth_units must be diopters or meters, got {other:?}"
        ))),
    }
}

fn load_scene(
    scene_path: &Path,
    depth_path: &Path,
    config: &Config,
) -> Result<RgbdScene, CliError> {
    let color = io::read_color_png(scene_path)?;
    let mut depth = io::load_depth_map(depth_path, depth_units(config)?)?;
    if config.render.remap_to_range {
        depth = io::remap_depth_range(
            &depth,
            config.layers.min_diopters,
            config.layers.max_diopters,
        );
    }
    Ok(RgbdScene::new(color, depth)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(&cli.config)?;
    match &cli.command {
        Command::Optimize { target_depth, out, trace } => {
            let template = config.problem_template()?;
            let problem = template.problem_for(*target_depth)?;
            let params = config.ga_params(cli.seed);
            let result = optimize_ga(&problem, &params)?;
            let n = problem.layer_count();
            let doc = json!({
                "target_depth": target_depth,
                "layer_count": n,
                "bitstring": result.strategy.bitstring(),
                "a": result.strategy.lit_count(),
                "illumination_time": result.strategy.illumination_time(template.dc_noise),
                "cost": {
                    "fidelity": result.cost.fidelity,
                    "penalty": result.cost.penalty,
                    "total": result.cost.total,
                },
                "generations": result.generations_run,
                "seed": cli.seed,
            });
            write_text(out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
            let mut artifacts = vec![out.clone()];
            if let Some(trace_path) = trace {
                let mut csv = String::from("generation,best_cost\n");
                for (g, c) in result.trace.iter().enumerate() {
                    csv.push_str(&format!("{g},{c}\n"));
                }
                write_text(trace_path, &csv)?;
                artifacts.push(trace_path.clone());
            }
            Ok(json!({
                "command": "optimize",
                "status": "ok",
                "target_depth": target_depth,
                "a": result.strategy.lit_count(),
                "cost": result.cost.total,
                "artifacts": io::existing_paths(&artifacts),
            })
            .to_string())
        }

        Command::Table { out, csv } => {
            let template = config.problem_template()?;
            let params = config.ga_params(cli.seed);
            let table = strategy::build_strategy_table(&template, &params)?;
            table.write_binary(out).map_err(|source| CliError::File {
                path: out.display().to_string(),
                source,
            })?;
            let mut artifacts = vec![out.clone()];
            if let Some(csv_path) = csv {
                let mut buf = Vec::new();
                table.write_csv(&mut buf).map_err(|source| CliError::File {
                    path: csv_path.display().to_string(),
                    source,
                })?;
                write_text(csv_path, &String::from_utf8(buf).unwrap())?;
                artifacts.push(csv_path.clone());
            }
            Ok(json!({
                "command": "table",
                "status": "ok",
                "entries": table.entries.len(),
                "table_id": table.table_id,
                "max_adjacent_hamming": table.max_adjacent_hamming(),
                "artifacts": io::existing_paths(&artifacts),
            })
            .to_string())
        }

        Command::Render { scene, depth, table, out, waveform } => {
            let scene = load_scene(scene, depth, &config)?;
            let table = StrategyTable::read_binary(table)?;
            let schedule = build_subframe_schedule(
                parse_waveform(waveform, &config)?,
                config.render.cycle_rate_hz,
                &table.layer_depths,
                None,
            )?;
            let quant = quantize_depth(&scene, &table.layer_depths);
            let seq = render::render_backlight_sequence(&scene, &table, &schedule)?;
            io::write_sequence(out, &seq)?;
            Ok(json!({
                "command": "render",
                "status": "ok",
                "masks": seq.masks.len(),
                "width": seq.width(),
                "height": seq.height(),
                "clamped_pixels": quant.clamped,
                "table_id": seq.table_id,
                "artifacts": [out.display().to_string()],
            })
            .to_string())
        }

        Command::Hdr { scene, depth, table, intensity, out, waveform } => {
            let scene = load_scene(scene, depth, &config)?;
            let table = StrategyTable::read_binary(table)?;
            let schedule = build_subframe_schedule(
                parse_waveform(waveform, &config)?,
                config.render.cycle_rate_hz,
                &table.layer_depths,
                None,
            )?;
            let intensity_map = io::read_gray_png(intensity)?;
            let hdr = HdrOptions::from_unit_map(&intensity_map);
            let template = config.problem_template()?;
            let seq = render::render_hdr_sequence(&scene, &table, &schedule, &hdr, &template)?;
            io::write_sequence(out, &seq)?;
            Ok(json!({
                "command": "hdr",
                "status": "ok",
                "masks": seq.masks.len(),
                "table_id": seq.table_id,
                "artifacts": [out.display().to_string()],
            })
            .to_string())
        }

        Command::Precompensate { scene, depth, out } => {
            let scene = load_scene(scene, depth, &config)?;
            let layers = config.layer_depths()?;
            let (corrected, clamped) = render::precompensate_depth_map(
                &scene,
                &config.aberration_spec()?,
                &config.optical_config(),
                &layers,
            );
            io::write_pfm(out, &corrected.depth)?;
            Ok(json!({
                "command": "precompensate",
                "status": "ok",
                "clamped_pixels": clamped,
                "field_curvature_waves": config.aberrations.field_curvature_waves,
                "artifacts": [out.display().to_string()],
            })
            .to_string())
        }

        Command::Simulate { seq, depths, out } => {
            let sequence = io::read_sequence(seq)?;
            let sim_config = config.simulation_config()?;
            let depth_list = depths
                .clone()
                .unwrap_or_else(|| sim_config.accommodation_depths.clone());
            let stack = sim::simulate_focal_stack(&sequence, &depth_list, &sim_config)?;
            io::write_focal_stack(out, &stack)?;
            Ok(json!({
                "command": "simulate",
                "status": "ok",
                "images": stack.entries.len(),
                "depths": depth_list,
                "sequence_id": stack.sequence_id,
                "artifacts": [out.display().to_string()],
            })
            .to_string())
        }

        Command::Contrast { table, out, csv, error_png, error_csv } => {
            let table = StrategyTable::read_binary(table)?;
            let template = config.problem_template()?;
            let reduction = ContrastReduction::WeightedMean;
            let map = sim::contrast_map(&table, &template, reduction)?;
            let ideal = sim::ideal_contrast_map(&template, reduction)?;
            let error = sim::contrast_error(&map, &ideal)?;
            io::write_contrast_png(out, &map, false)?;
            let mut artifacts = vec![out.clone()];
            if let Some(p) = csv {
                io::write_contrast_csv(p, &map)?;
                artifacts.push(p.clone());
            }
            if let Some(p) = error_png {
                io::write_contrast_png(p, &error, true)?;
                artifacts.push(p.clone());
            }
            if let Some(p) = error_csv {
                io::write_contrast_csv(p, &error)?;
                artifacts.push(p.clone());
            }
            Ok(json!({
                "command": "contrast",
                "status": "ok",
                "targets": map.target_depths.len(),
                "planes": map.accommodation_depths.len(),
                "summed_error_magnitude": sim::summed_error_magnitude(&error),
                "artifacts": io::existing_paths(&artifacts),
            })
            .to_string())
        }

        Command::Schedule { waveform, out } => {
            let layers = config.layer_depths()?;
            let schedule = build_subframe_schedule(
                parse_waveform(waveform, &config)?,
                config.render.cycle_rate_hz,
                &layers,
                None,
            )?;
            let doc = json!({
                "waveform": schedule.waveform,
                "cycle_rate_hz": schedule.cycle_rate_hz,
                "subframes_per_cycle": schedule.subframes_per_cycle(),
                "subframes_per_second": schedule.subframes_per_second(),
                "layer_depths": schedule.layer_depths,
                "mapping": schedule.mapping,
            });
            write_text(out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
            Ok(json!({
                "command": "schedule",
                "status": "ok",
                "subframes_per_second": schedule.subframes_per_second(),
                "artifacts": [out.display().to_string()],
            })
            .to_string())
        }
    }
}
