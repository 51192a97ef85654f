//! End-to-end orchestration: score, smooth, segment, solve rates, select,
//! stabilize, evaluate. Every stage's artifact can be written to an output
//! directory, and the whole run is deterministic for a fixed seed.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureStream, ScoreConfig};
use crate::geometry::derive_seed;
use crate::graph::{
    segment_cost_cache, select_frames_cached, GraphWeights, SegmentCosts, SelectionOutcome,
};
use crate::metrics::{
    achieved_speedup, instability_index, semantic_retention, InstabilityConfig, Retention,
};
use crate::profile::{refine_multi_importance, SegmentKind, SegmentTree, SemanticProfile};
use crate::pso::{
    fitness_graph_weights, fitness_lambda, infeasible_penalty, pso_optimize,
    GraphFitnessContext, PsoConfig, PsoResult,
};
use crate::speedup::{solve_speedups, SpeedupProblem, SpeedupSolution};
use crate::stabilizer::{
    crop_selection, render_plan, stabilize, write_rasters, StabilizationPlan, StabilizerConfig,
};

/// Marker for config entries that trigger the PSO stage instead of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Auto(AutoKeyword),
}

impl<T> AutoOr<T> {
    pub fn is_auto(&self) -> bool {
        matches!(self, AutoOr::Auto(_))
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_required() -> f64 {
    10.0
}
fn default_stop_ratio() -> f64 {
    0.9
}
fn default_bins() -> usize {
    256
}
fn default_speedup_lambdas() -> AutoOr<[f64; 2]> {
    AutoOr::Auto(AutoKeyword::Auto)
}
fn default_max_factor() -> f64 {
    10.0
}
fn default_graph_lambdas() -> AutoOr<[f64; 4]> {
    AutoOr::Value([1.0, 1.0, 1.0, 1.0])
}
fn default_bound() -> f64 {
    10.0
}
fn default_particles() -> usize {
    30
}
fn default_pso_iterations() -> usize {
    100
}
fn default_inertia() -> f64 {
    0.729
}
fn default_acceleration() -> f64 {
    1.49445
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileStageConfig {
    #[serde(default = "default_stop_ratio")]
    pub stop_ratio: f64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl Default for ProfileStageConfig {
    fn default() -> Self {
        ProfileStageConfig {
            stop_ratio: default_stop_ratio(),
            histogram_bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedupStageConfig {
    /// `[lambda1, lambda2]` or `"auto"`.
    #[serde(default = "default_speedup_lambdas")]
    pub lambdas: AutoOr<[f64; 2]>,
    /// `F_max = factor * required`.
    #[serde(default = "default_max_factor")]
    pub max_speedup_factor: f64,
}

impl Default for SpeedupStageConfig {
    fn default() -> Self {
        SpeedupStageConfig {
            lambdas: default_speedup_lambdas(),
            max_speedup_factor: default_max_factor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphStageConfig {
    /// `[instability, velocity, appearance, semantic]` or `"auto"`.
    #[serde(default = "default_graph_lambdas")]
    pub lambdas: AutoOr<[f64; 4]>,
    #[serde(default = "GraphWeights::default_max_skip")]
    pub max_skip: usize,
    #[serde(default = "GraphWeights::default_border")]
    pub border: usize,
    #[serde(default = "GraphWeights::default_epsilon")]
    pub epsilon: f64,
}

impl Default for GraphStageConfig {
    fn default() -> Self {
        GraphStageConfig {
            lambdas: default_graph_lambdas(),
            max_skip: 100,
            border: 30,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoStageConfig {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_pso_iterations")]
    pub iterations: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_acceleration")]
    pub cognitive: f64,
    #[serde(default = "default_acceleration")]
    pub social: f64,
    /// Search bound: every tuned weight lives in `[0, bound]`.
    #[serde(default = "default_bound")]
    pub bound: f64,
}

impl Default for PsoStageConfig {
    fn default() -> Self {
        PsoStageConfig {
            particles: default_particles(),
            iterations: default_pso_iterations(),
            inertia: default_inertia(),
            cognitive: default_acceleration(),
            social: default_acceleration(),
            bound: default_bound(),
        }
    }
}

impl PsoStageConfig {
    fn build(&self, dims: usize, seed: u64) -> PsoConfig {
        PsoConfig {
            particles: self.particles,
            iterations: self.iterations,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            bounds: vec![(0.0, self.bound); dims],
            seed,
            init: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsStageConfig {
    /// Instability buffer override; defaults to half a second of frames.
    #[serde(default)]
    pub buffer: Option<usize>,
}

/// Stabilizer knobs as they appear in the config file (the RANSAC seed is
/// derived from the pipeline seed).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizerStageConfig {
    #[serde(default = "StabilizerStageConfig::default_segment_size")]
    pub segment_size: usize,
    #[serde(default = "StabilizerStageConfig::default_drop_fraction")]
    pub drop_fraction: f64,
    #[serde(default = "StabilizerStageConfig::default_crop_fraction")]
    pub crop_fraction: f64,
    #[serde(default = "StabilizerStageConfig::default_eta")]
    pub eta: f64,
    #[serde(default = "StabilizerStageConfig::default_replacement_sigma")]
    pub replacement_sigma: f64,
    #[serde(default = "StabilizerStageConfig::default_ransac_iterations")]
    pub ransac_iterations: usize,
    #[serde(default = "StabilizerStageConfig::default_ransac_threshold")]
    pub ransac_threshold: f64,
}

impl StabilizerStageConfig {
    fn default_segment_size() -> usize {
        4
    }
    fn default_drop_fraction() -> f64 {
        0.5
    }
    fn default_crop_fraction() -> f64 {
        0.9
    }
    fn default_eta() -> f64 {
        0.5
    }
    fn default_replacement_sigma() -> f64 {
        10.0
    }
    fn default_ransac_iterations() -> usize {
        500
    }
    fn default_ransac_threshold() -> f64 {
        3.0
    }

    fn build(&self, seed: u64) -> StabilizerConfig {
        StabilizerConfig {
            segment_size: self.segment_size,
            drop_fraction: self.drop_fraction,
            crop_fraction: self.crop_fraction,
            eta: self.eta,
            replacement_sigma: self.replacement_sigma,
            ransac_iterations: self.ransac_iterations,
            ransac_threshold: self.ransac_threshold,
            seed,
        }
    }
}

impl Default for StabilizerStageConfig {
    fn default() -> Self {
        StabilizerStageConfig {
            segment_size: Self::default_segment_size(),
            drop_fraction: Self::default_drop_fraction(),
            crop_fraction: Self::default_crop_fraction(),
            eta: Self::default_eta(),
            replacement_sigma: Self::default_replacement_sigma(),
            ransac_iterations: Self::default_ransac_iterations(),
            ransac_threshold: Self::default_ransac_threshold(),
        }
    }
}

impl GraphWeights {
    fn default_max_skip() -> usize {
        100
    }
    fn default_border() -> usize {
        30
    }
    fn default_epsilon() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_required")]
    pub required_speedup: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub profile: ProfileStageConfig,
    #[serde(default)]
    pub speedup: SpeedupStageConfig,
    #[serde(default)]
    pub graph: GraphStageConfig,
    #[serde(default)]
    pub pso: PsoStageConfig,
    #[serde(default)]
    pub stabilizer: StabilizerStageConfig,
    #[serde(default)]
    pub metrics: MetricsStageConfig,
    #[serde(default)]
    pub score: Option<ScoreConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            required_speedup: default_required(),
            seed: 0,
            profile: ProfileStageConfig::default(),
            speedup: SpeedupStageConfig::default(),
            graph: GraphStageConfig::default(),
            pso: PsoStageConfig::default(),
            stabilizer: StabilizerStageConfig::default(),
            metrics: MetricsStageConfig::default(),
            score: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.required_speedup >= 1.0) {
            return Err(Error::Config("required_speedup must be at least 1".into()));
        }
        if !(self.profile.stop_ratio > 0.0 && self.profile.stop_ratio < 1.0) {
            return Err(Error::Config(
                "profile.stop_ratio must lie strictly between 0 and 1".into(),
            ));
        }
        if self.profile.histogram_bins < 2 {
            return Err(Error::Config("profile.histogram_bins must be >= 2".into()));
        }
        if self.speedup.max_speedup_factor < 1.0 {
            return Err(Error::Config(
                "speedup.max_speedup_factor must be at least 1".into(),
            ));
        }
        self.graph_weights([0.0; 4])
            .validate()
            .map_err(|e| Error::Config(format!("graph stage: {e}")))?;
        Ok(())
    }

    fn graph_weights(&self, lambdas: [f64; 4]) -> GraphWeights {
        GraphWeights {
            instability: lambdas[0],
            velocity: lambdas[1],
            appearance: lambdas[2],
            semantic: lambdas[3],
            epsilon: self.graph.epsilon,
            max_skip: self.graph.max_skip,
            border: self.graph.border,
        }
    }
}

// --- stages ------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoTraceRecord {
    pub stage: String,
    pub result: PsoResult,
}

/// Per-frame scores plus the smoothed profile.
pub fn compute_profile(
    stream: &FeatureStream,
    config: &PipelineConfig,
) -> Result<SemanticProfile> {
    let score_config = config.score.clone().unwrap_or_default();
    let scores = stream
        .semantic_scores(&score_config)
        .map_err(Error::stage("score"))?;
    SemanticProfile::new(scores, stream.fps(), config.required_speedup)
        .map_err(Error::stage("smooth"))
}

/// Multi-importance segmentation with the configured (or PSO-tuned) rate
/// solver. Returns the tree and any PSO traces it produced.
pub fn build_tree(
    profile: &SemanticProfile,
    config: &PipelineConfig,
) -> Result<(SegmentTree, Vec<PsoTraceRecord>)> {
    let max_factor = config.speedup.max_speedup_factor;
    let pso_seed = derive_seed(config.seed, 0x70736f, 1);
    let traces: RefCell<Vec<PsoTraceRecord>> = RefCell::new(Vec::new());
    let solve_count = RefCell::new(0usize);
    let solver = |ls: usize, lns: usize, fd: f64, cap: Option<f64>| -> Result<SpeedupSolution> {
        let max_speedup = cap.unwrap_or(max_factor * fd).max(fd);
        let lambdas = match &config.speedup.lambdas {
            AutoOr::Value(v) => *v,
            AutoOr::Auto(_) => {
                let bounds = vec![(0.0, config.pso.bound); 2];
                let penalty = infeasible_penalty(&bounds);
                let fitness =
                    |pos: &[f64]| -> f64 { fitness_lambda(pos, ls, lns, fd, max_speedup, penalty) };
                let mut invocation = solve_count.borrow_mut();
                *invocation += 1;
                let pso_config = PsoConfig {
                    bounds,
                    ..config.pso.build(2, derive_seed(pso_seed, *invocation as u64, 2))
                };
                let result = pso_optimize(&fitness, &pso_config)?;
                let best = [result.position[0], result.position[1]];
                traces.borrow_mut().push(PsoTraceRecord {
                    stage: format!("speedup_lambdas_{invocation}"),
                    result,
                });
                best
            }
        };
        solve_speedups(&SpeedupProblem {
            semantic_frames: ls,
            non_semantic_frames: lns,
            required: fd,
            lambda1: lambdas[0],
            lambda2: lambdas[1],
            max_speedup,
        })
    };
    let tree = refine_multi_importance(
        profile,
        config.profile.stop_ratio,
        config.profile.histogram_bins,
        &solver,
    )
    .map_err(Error::stage("segment"))?;
    Ok((tree, traces.into_inner()))
}

/// Graph weights from the config, tuning the four lambdas by PSO when set
/// to `"auto"`.
pub fn resolve_graph_weights(
    stream: &FeatureStream,
    scores: &[f64],
    tree: &SegmentTree,
    costs: &[SegmentCosts],
    config: &PipelineConfig,
) -> Result<(GraphWeights, Option<PsoTraceRecord>)> {
    match &config.graph.lambdas {
        AutoOr::Value(v) => Ok((config.graph_weights(*v), None)),
        AutoOr::Auto(_) => {
            let bounds = vec![(0.0, config.pso.bound); 4];
            let penalty = infeasible_penalty(&bounds);
            let ctx = GraphFitnessContext::new(
                stream,
                scores,
                tree,
                costs,
                config.graph_weights([1.0; 4]),
                config.required_speedup,
                penalty,
            );
            let fitness = |pos: &[f64]| -> f64 { fitness_graph_weights(pos, &ctx) };
            let pso_seed = derive_seed(config.seed, 0x70736f, 1);
            let pso_config = PsoConfig {
                bounds,
                ..config.pso.build(4, derive_seed(pso_seed, 0, 4))
            };
            let result = pso_optimize(&fitness, &pso_config).map_err(Error::stage("weights"))?;
            let lambdas = [
                result.position[0],
                result.position[1],
                result.position[2],
                result.position[3],
            ];
            Ok((
                config.graph_weights(lambdas),
                Some(PsoTraceRecord {
                    stage: "graph_lambdas".into(),
                    result,
                }),
            ))
        }
    }
}

/// Segmentation through frame selection in one call.
pub fn select_stage(
    stream: &FeatureStream,
    profile: &SemanticProfile,
    config: &PipelineConfig,
) -> Result<SelectStageOutput> {
    let (tree, mut traces) = build_tree(profile, config)?;
    let video_mean = stream.mean_flow_magnitude();
    let base_weights = config.graph_weights([1.0; 4]);
    let costs = segment_cost_cache(stream, &profile.raw, video_mean, &tree, &base_weights)
        .map_err(Error::stage("select"))?;
    let (weights, trace) = resolve_graph_weights(stream, &profile.raw, &tree, &costs, config)?;
    if let Some(t) = trace {
        traces.push(t);
    }
    let selection =
        select_frames_cached(&costs, &tree, &weights).map_err(Error::stage("select"))?;
    Ok(SelectStageOutput {
        tree,
        weights,
        selection,
        traces,
    })
}

#[derive(Debug)]
pub struct SelectStageOutput {
    pub tree: SegmentTree,
    pub weights: GraphWeights,
    pub selection: SelectionOutcome,
    pub traces: Vec<PsoTraceRecord>,
}

/// The frames a selection leaves out, in order.
pub fn dropped_frames(length: usize, selection: &[usize]) -> Vec<usize> {
    let mut in_selection = vec![false; length];
    for &f in selection {
        in_selection[f] = true;
    }
    (0..length).filter(|&f| !in_selection[f]).collect()
}

/// Stabilization with the seed derived from the pipeline seed.
pub fn stabilize_stage(
    stream: &FeatureStream,
    scores: &[f64],
    selection: &[usize],
    config: &PipelineConfig,
) -> Result<StabilizationPlan> {
    let dropped = dropped_frames(stream.len(), selection);
    let stab_config = config
        .stabilizer
        .build(derive_seed(config.seed, 0x73746162, 3));
    stabilize(selection, &dropped, stream, scores, &stab_config)
        .map_err(Error::stage("stabilize"))
}

// --- report ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub level: u32,
    pub speedup: u32,
    pub selected_frames: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub stabilized: f64,
    pub unstabilized: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub required_speedup: f64,
    pub input_frames: usize,
    pub selected_frames: usize,
    pub output_frames: usize,
    /// Input length over selection length, before stabilization edits.
    pub selection_speedup: f64,
    /// Input length over emitted output length.
    pub achieved_speedup: f64,
    pub retention: Retention,
    pub instability: Option<InstabilityReport>,
    pub segments: Vec<SegmentReport>,
}

/// Metrics over a finished selection and plan. Rendering (and hence the
/// instability pair) happens only when every frame carries a raster; the
/// stabilized sequence is written under `out_dir/stabilized` when given.
pub fn evaluate(
    stream: &FeatureStream,
    scores: &[f64],
    tree: Option<&SegmentTree>,
    selection: &[usize],
    plan: &StabilizationPlan,
    config: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<Report> {
    let required = config.required_speedup;
    let output_frames = plan.output_frames();
    let retention = semantic_retention(selection, scores, required)?;
    let have_rasters = stream.frames().iter().all(|f| f.raster.is_some());
    let instability = if have_rasters {
        let stabilized = render_plan(plan, stream)?;
        if let Some(dir) = out_dir {
            write_rasters(&stabilized, &dir.join("stabilized"))?;
        }
        let unstabilized = crop_selection(stream, selection, plan.crop_fraction)?;
        let metrics_config = match config.metrics.buffer {
            Some(buffer) => InstabilityConfig { buffer, stride: 1 },
            None => InstabilityConfig::for_fps(stream.fps()),
        };
        if stabilized.len() >= metrics_config.buffer && unstabilized.len() >= metrics_config.buffer
        {
            Some(InstabilityReport {
                stabilized: instability_index(&stabilized, &metrics_config)?,
                unstabilized: instability_index(&unstabilized, &metrics_config)?,
            })
        } else {
            None
        }
    } else {
        None
    };
    let segments = tree
        .map(|tree| {
            tree.leaves
                .iter()
                .map(|leaf| SegmentReport {
                    start: leaf.start,
                    end: leaf.end,
                    kind: leaf.kind,
                    level: leaf.level,
                    speedup: leaf.speedup.unwrap_or(0),
                    selected_frames: selection
                        .iter()
                        .filter(|&&f| f >= leaf.start && f < leaf.end)
                        .count(),
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(Report {
        required_speedup: required,
        input_frames: stream.len(),
        selected_frames: selection.len(),
        output_frames: output_frames.len(),
        selection_speedup: achieved_speedup(stream.len(), selection.len())?,
        achieved_speedup: achieved_speedup(stream.len(), output_frames.len())?,
        retention,
        instability,
        segments,
    })
}

/// Everything a run produces, with the artifact paths when written.
#[derive(Debug)]
pub struct PipelineOutput {
    pub scores: Vec<f64>,
    pub tree: SegmentTree,
    pub selection: SelectionOutcome,
    pub plan: StabilizationPlan,
    pub report: Report,
    pub pso_traces: Vec<PsoTraceRecord>,
    pub artifacts: Vec<PathBuf>,
}

/// Uniformly sampled baseline: every `ceil(required)`-th frame.
pub fn uniform_baseline(length: usize, required: f64) -> Vec<usize> {
    let step = (required.ceil() as usize).max(1);
    (0..length).step_by(step).collect()
}

/// Serializes one artifact as pretty JSON under `dir`.
pub fn write_artifact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

fn maybe_write<T: Serialize>(
    dir: Option<&Path>,
    name: &str,
    value: &T,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    if let Some(dir) = dir {
        artifacts.push(write_artifact(dir, name, value)?);
    }
    Ok(())
}

/// Runs every stage over a loaded stream. When `out_dir` is given, all
/// intermediate artifacts are written beneath it.
pub fn run_pipeline(
    stream: &FeatureStream,
    config: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let mut artifacts = Vec::new();

    let profile = compute_profile(stream, config)?;
    maybe_write(
        out_dir,
        "scores.json",
        &serde_json::json!({
            "raw": profile.raw,
            "smoothed": profile.smoothed,
        }),
        &mut artifacts,
    )?;

    let staged = select_stage(stream, &profile, config)?;
    maybe_write(out_dir, "segments.json", &staged.tree, &mut artifacts)?;
    maybe_write(
        out_dir,
        "selection.json",
        &selection_artifact(&staged),
        &mut artifacts,
    )?;
    if !staged.traces.is_empty() {
        maybe_write(out_dir, "pso_trace.json", &staged.traces, &mut artifacts)?;
    }

    let plan = stabilize_stage(stream, &profile.raw, &staged.selection.selection, config)?;
    maybe_write(out_dir, "plan.json", &plan, &mut artifacts)?;

    let report = evaluate(
        stream,
        &profile.raw,
        Some(&staged.tree),
        &staged.selection.selection,
        &plan,
        config,
        out_dir,
    )
    .map_err(Error::stage("metrics"))?;
    maybe_write(out_dir, "report.json", &report, &mut artifacts)?;

    Ok(PipelineOutput {
        scores: profile.raw,
        tree: staged.tree,
        selection: staged.selection,
        plan,
        report,
        pso_traces: staged.traces,
        artifacts,
    })
}

/// The `selection.json` payload.
pub fn selection_artifact(staged: &SelectStageOutput) -> serde_json::Value {
    serde_json::json!({
        "selection": staged.selection.selection,
        "path_costs": staged.selection.path_costs,
        "segment_speedups": staged
            .tree
            .leaves
            .iter()
            .map(|s| serde_json::json!({
                "start": s.start,
                "end": s.end,
                "speedup": s.speedup,
            }))
            .collect::<Vec<_>>(),
    })
}

/// Reads back the `selection` array from a `selection.json`.
pub fn load_selection(path: &Path) -> Result<Vec<usize>> {
    #[derive(Deserialize)]
    struct SelectionFile {
        selection: Vec<usize>,
    }
    let text = fs::read_to_string(path)?;
    let parsed: SelectionFile = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(parsed.selection)
}

/// Reads back a `plan.json`.
pub fn load_plan(path: &Path) -> Result<StabilizationPlan> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}
