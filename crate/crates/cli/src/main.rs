//! `miff`: multi-importance fast-forward over per-frame feature streams.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use miff_core::error::{Error, Result};
use miff_core::features::FeatureStream;
use miff_core::pipeline::{
    self, compute_profile, evaluate, load_plan, load_selection, run_pipeline,
    select_stage, stabilize_stage, write_artifact, PipelineConfig,
};
use miff_core::scenario::{synthesize_scenario, ScenarioSpec};
use miff_core::speedup::{solve_speedups, SpeedupProblem};

#[derive(Parser)]
#[command(
    name = "miff",
    version,
    about = "Adaptive fast-forward frame selection and stabilization for egocentric feature streams"
)]
struct Cli {
    /// Pipeline configuration file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the required speed-up from the configuration.
    #[arg(long, global = true)]
    speedup: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: feature stream, ground truth, rasters.
    Synth {
        /// Scenario specification (JSON).
        #[arg(long)]
        spec: PathBuf,
    },
    /// Score every frame and write the raw and smoothed profiles.
    Score {
        /// Feature stream (JSON Lines).
        #[arg(long)]
        stream: PathBuf,
    },
    /// Segment the profile into importance levels with assigned rates.
    Segment {
        #[arg(long)]
        stream: PathBuf,
    },
    /// Solve the two-rate assignment for explicit frame counts.
    Speedup {
        /// Frames inside semantic segments.
        #[arg(long)]
        semantic_frames: usize,
        /// Frames outside semantic segments.
        #[arg(long)]
        non_semantic_frames: usize,
    },
    /// Run scoring, segmentation and graph selection; write the selection.
    Select {
        #[arg(long)]
        stream: PathBuf,
    },
    /// Stabilize a previously computed selection.
    Stabilize {
        #[arg(long)]
        stream: PathBuf,
        /// A selection.json produced by `select` or `run`.
        #[arg(long)]
        selection: PathBuf,
    },
    /// Evaluate a selection (and optionally a plan) against the stream.
    Metrics {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        /// A plan.json produced by `stabilize` or `run`.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// The whole pipeline: score, segment, select, stabilize, evaluate.
    Run {
        #[arg(long)]
        stream: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(speedup) = cli.speedup {
        config.required_speedup = speedup;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--out <dir> is required for this command".into()))
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { spec } => {
            let dir = out_dir(cli)?;
            let text = std::fs::read_to_string(spec)?;
            let mut scenario: ScenarioSpec =
                serde_json::from_str(&text).map_err(|e| Error::Format {
                    path: spec.display().to_string(),
                    line: e.line(),
                    message: e.to_string(),
                })?;
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            let (stream, truth) = synthesize_scenario(&scenario)?;
            std::fs::create_dir_all(dir)?;
            stream.save(&dir.join("features.jsonl"))?;
            write_artifact(dir, "ground_truth.json", &truth)?;
            println!(
                "synthesized {} frames at {} fps into {}",
                stream.len(),
                stream.fps(),
                dir.display()
            );
            Ok(())
        }
        Command::Score { stream } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let profile = compute_profile(&stream, &config)?;
            write_artifact(
                dir,
                "scores.json",
                &serde_json::json!({
                    "raw": profile.raw,
                    "smoothed": profile.smoothed,
                }),
            )?;
            println!("scored {} frames", stream.len());
            Ok(())
        }
        Command::Segment { stream } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let profile = compute_profile(&stream, &config)?;
            let (tree, traces) = pipeline::build_tree(&profile, &config)?;
            write_artifact(dir, "segments.json", &tree)?;
            if !traces.is_empty() {
                write_artifact(dir, "pso_trace.json", &traces)?;
            }
            println!(
                "{} leaves across {} levels, thresholds {:?}",
                tree.leaves.len(),
                tree.max_level() + 1,
                tree.thresholds
            );
            Ok(())
        }
        Command::Speedup {
            semantic_frames,
            non_semantic_frames,
        } => {
            let config = load_config(cli)?;
            let lambdas = config.speedup.lambdas.value().copied();
            let required = config.required_speedup;
            let solution = match lambdas {
                Some([lambda1, lambda2]) => solve_speedups(&SpeedupProblem {
                    semantic_frames: *semantic_frames,
                    non_semantic_frames: *non_semantic_frames,
                    required,
                    lambda1,
                    lambda2,
                    max_speedup: config.speedup.max_speedup_factor * required,
                })?,
                None => {
                    // "auto": reuse the segmentation-stage solver on a
                    // profile with the given counts
                    use miff_core::pso::{fitness_lambda, infeasible_penalty, pso_optimize};
                    let bounds = vec![(0.0, config.pso.bound); 2];
                    let penalty = infeasible_penalty(&bounds);
                    let max_speedup = config.speedup.max_speedup_factor * required;
                    let fitness = |pos: &[f64]| -> f64 {
                        fitness_lambda(
                            pos,
                            *semantic_frames,
                            *non_semantic_frames,
                            required,
                            max_speedup,
                            penalty,
                        )
                    };
                    let pso_config = miff_core::PsoConfig {
                        bounds,
                        ..miff_core::PsoConfig::standard(
                            vec![(0.0, config.pso.bound); 2],
                            config.seed,
                        )
                    };
                    let result = pso_optimize(&fitness, &pso_config)?;
                    solve_speedups(&SpeedupProblem {
                        semantic_frames: *semantic_frames,
                        non_semantic_frames: *non_semantic_frames,
                        required,
                        lambda1: result.position[0],
                        lambda2: result.position[1],
                        max_speedup,
                    })?
                }
            };
            let json = serde_json::to_string_pretty(&solution).map_err(|e| Error::Json {
                path: "<stdout>".into(),
                source: e,
            })?;
            println!("{json}");
            if let Some(dir) = cli.out.as_deref() {
                write_artifact(dir, "speedup.json", &solution)?;
            }
            Ok(())
        }
        Command::Select { stream } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let profile = compute_profile(&stream, &config)?;
            let staged = select_stage(&stream, &profile, &config)?;
            write_artifact(
                dir,
                "scores.json",
                &serde_json::json!({
                    "raw": profile.raw,
                    "smoothed": profile.smoothed,
                }),
            )?;
            write_artifact(dir, "segments.json", &staged.tree)?;
            write_artifact(dir, "selection.json", &pipeline::selection_artifact(&staged))?;
            if !staged.traces.is_empty() {
                write_artifact(dir, "pso_trace.json", &staged.traces)?;
            }
            println!(
                "selected {} of {} frames (rate {:.2})",
                staged.selection.selection.len(),
                stream.len(),
                stream.len() as f64 / staged.selection.selection.len() as f64
            );
            Ok(())
        }
        Command::Stabilize { stream, selection } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let selection = load_selection(selection)?;
            let profile = compute_profile(&stream, &config)?;
            let plan = stabilize_stage(&stream, &profile.raw, &selection, &config)?;
            write_artifact(dir, "plan.json", &plan)?;
            if stream.frames().iter().all(|f| f.raster.is_some()) {
                let rendered = miff_core::stabilizer::render_plan(&plan, &stream)?;
                miff_core::stabilizer::write_rasters(&rendered, &dir.join("stabilized"))?;
            }
            if !plan.unstabilizable_segments.is_empty()
                && plan.unstabilizable_segments.len()
                    >= selection.len().div_ceil(config.stabilizer.segment_size)
            {
                return Err(Error::Unstabilizable(
                    "no segment could be registered".into(),
                ));
            }
            println!(
                "stabilized {} frames ({} unstabilizable segments)",
                plan.entries.len(),
                plan.unstabilizable_segments.len()
            );
            Ok(())
        }
        Command::Metrics {
            stream,
            selection,
            plan,
        } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let selection = load_selection(selection)?;
            let profile = compute_profile(&stream, &config)?;
            let plan = match plan {
                Some(path) => load_plan(path)?,
                None => stabilize_stage(&stream, &profile.raw, &selection, &config)?,
            };
            let report = evaluate(
                &stream,
                &profile.raw,
                None,
                &selection,
                &plan,
                &config,
                None,
            )?;
            write_artifact(dir, "report.json", &report)?;
            println!(
                "achieved {:.3} (required {:.1}), retention {:.3}",
                report.achieved_speedup, report.required_speedup, report.retention.fraction
            );
            Ok(())
        }
        Command::Run { stream } => {
            let dir = out_dir(cli)?;
            let config = load_config(cli)?;
            let stream = FeatureStream::load(stream)?;
            let output = run_pipeline(&stream, &config, Some(dir))?;
            println!(
                "{} -> {} frames (required {:.1}, achieved {:.3}), retention {:.3}{}",
                stream.len(),
                output.report.output_frames,
                output.report.required_speedup,
                output.report.achieved_speedup,
                output.report.retention.fraction,
                if output.report.retention.degenerate {
                    " (degenerate)"
                } else {
                    ""
                }
            );
            Ok(())
        }
    }
}
