//! Particle swarm optimization and the two fitness functions used for
//! automatic parameter setting: one tunes the speed-up regularizers, the
//! other tunes the four graph weights.

use nalgebra::Point2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStream;
use crate::graph::{select_frames_cached, GraphWeights, SegmentCosts};
use crate::profile::SegmentTree;
use crate::speedup::{solve_speedups, SpeedupProblem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Inclusive per-dimension bounds.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    /// Optional explicit start positions (defaults to uniform in bounds).
    #[serde(default)]
    pub init: Option<Vec<Vec<f64>>>,
}

impl PsoConfig {
    /// Standard constriction-style constants over the given bounds.
    pub fn standard(bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        PsoConfig {
            particles: 30,
            iterations: 100,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            bounds,
            seed,
            init: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidArgument(
                "swarm needs at least two particles".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "need at least one iteration".into(),
            ));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidArgument("bounds are empty".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "bad bound [{lo}, {hi}]"
                )));
            }
        }
        if let Some(init) = &self.init {
            if init.len() != self.particles {
                return Err(Error::InvalidArgument(
                    "initial positions must cover the whole swarm".into(),
                ));
            }
            for pos in init {
                if pos.len() != self.bounds.len() {
                    return Err(Error::InvalidArgument(
                        "initial position dimensionality mismatch".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Global best after each iteration (index 0 is the post-init state).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub position: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoResult {
    pub position: Vec<f64>,
    pub fitness: f64,
    pub trace: Vec<TracePoint>,
}

/// Inertia-weight PSO, deterministic per seed. Particle evaluations run
/// concurrently; velocity updates are a synchronized sequential step so the
/// RNG stream stays reproducible.
pub fn pso_optimize<F>(fitness: &F, config: &PsoConfig) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dims = config.bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut positions: Vec<Vec<f64>> = match &config.init {
        Some(init) => init
            .iter()
            .map(|pos| {
                pos.iter()
                    .zip(&config.bounds)
                    .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
                    .collect()
            })
            .collect(),
        None => (0..config.particles)
            .map(|_| {
                config
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                    .collect()
            })
            .collect(),
    };
    let mut velocities = vec![vec![0.0; dims]; config.particles];

    let evaluate = |positions: &[Vec<f64>]| -> Result<Vec<f64>> {
        let values: Vec<f64> = positions.par_iter().map(|p| fitness(p)).collect();
        for (p, &v) in positions.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "fitness is not finite at position {p:?}"
                )));
            }
        }
        Ok(values)
    };

    let mut personal_best = positions.clone();
    let mut personal_fitness = evaluate(&positions)?;
    let mut best_idx = 0;
    for i in 1..config.particles {
        if personal_fitness[i] < personal_fitness[best_idx] {
            best_idx = i;
        }
    }
    let mut global_best = personal_best[best_idx].clone();
    let mut global_fitness = personal_fitness[best_idx];
    let mut trace = vec![TracePoint {
        position: global_best.clone(),
        fitness: global_fitness,
    }];

    for _ in 0..config.iterations {
        for i in 0..config.particles {
            for d in 0..dims {
                let (lo, hi) = config.bounds[d];
                let width = hi - lo;
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = config.inertia * velocities[i][d]
                    + config.cognitive * r1 * (personal_best[i][d] - positions[i][d])
                    + config.social * r2 * (global_best[d] - positions[i][d]);
                velocities[i][d] = v.clamp(-width, width);
                positions[i][d] = (positions[i][d] + velocities[i][d]).clamp(lo, hi);
            }
        }
        let fitnesses = evaluate(&positions)?;
        for i in 0..config.particles {
            if fitnesses[i] < personal_fitness[i] {
                personal_fitness[i] = fitnesses[i];
                personal_best[i] = positions[i].clone();
            }
            if fitnesses[i] < global_fitness {
                global_fitness = fitnesses[i];
                global_best = positions[i].clone();
            }
        }
        trace.push(TracePoint {
            position: global_best.clone(),
            fitness: global_fitness,
        });
    }
    Ok(PsoResult {
        position: global_best,
        fitness: global_fitness,
        trace,
    })
}

// --- fitness for the speed-up regularizers ------------------------------------

/// The rate-assignment quality of a solved pair: distance of the semantic
/// rate from the midpoint target, the overall-rate error, and the spread.
pub fn rate_pair_fitness(
    semantic: u32,
    non_semantic: u32,
    semantic_frames: usize,
    non_semantic_frames: usize,
    required: f64,
) -> f64 {
    const EMPHASIS_WEIGHT: f64 = 2.0;
    let ls = semantic_frames as f64;
    let lns = non_semantic_frames as f64;
    let total = ls + lns;
    let p_s = ls / total;
    let p_ns = lns / total;
    let fs = f64::from(semantic);
    let fns = f64::from(non_semantic);
    let achieved = total / (ls / fs + lns / fns);
    EMPHASIS_WEIGHT * (fs - (required + p_s * required) / 2.0).abs()
        + (achieved - required).abs()
        + p_ns * (fs - fns).abs()
}

/// Large constant charged when a candidate position yields an infeasible
/// rate problem.
pub fn infeasible_penalty(bounds: &[(f64, f64)]) -> f64 {
    let width = bounds
        .iter()
        .map(|&(lo, hi)| hi - lo)
        .fold(1.0f64, f64::max);
    width * 1e3
}

/// Fitness of a `(lambda1, lambda2)` candidate: solve the rate problem under
/// those regularizers and score the resulting pair. Infeasible positions get
/// `penalty`.
pub fn fitness_lambda(
    position: &[f64],
    semantic_frames: usize,
    non_semantic_frames: usize,
    required: f64,
    max_speedup: f64,
    penalty: f64,
) -> f64 {
    let problem = SpeedupProblem {
        semantic_frames,
        non_semantic_frames,
        required,
        lambda1: position[0],
        lambda2: position[1],
        max_speedup,
    };
    match solve_speedups(&problem) {
        Ok(solution) => rate_pair_fitness(
            solution.semantic,
            solution.non_semantic,
            semantic_frames,
            non_semantic_frames,
            required,
        ),
        Err(err) => {
            log::debug!("infeasible rate problem at lambda={position:?}: {err}");
            penalty
        }
    }
}

// --- jitter and the graph-weight fitness ---------------------------------------

/// Mean consecutive FOE displacement over the selected frames, plus the
/// per-video maximum (the frame diagonal). Frames without a FOE inherit the
/// nearest preceding one.
pub fn compute_jitter(stream: &FeatureStream, selection: &[usize]) -> (f64, f64) {
    let first = stream.frame(0);
    let max_jitter =
        ((first.width as f64).powi(2) + (first.height as f64).powi(2)).sqrt();
    if selection.len() < 2 {
        return (0.0, max_jitter);
    }
    let foe_of = |frame: usize| -> Option<Point2<f64>> {
        // nearest preceding FOE, then nearest following for a leading gap
        for k in (0..=frame).rev() {
            if let Some([x, y]) = stream.frame(k).foe {
                return Some(Point2::new(x, y));
            }
        }
        for k in frame + 1..stream.len() {
            if let Some([x, y]) = stream.frame(k).foe {
                return Some(Point2::new(x, y));
            }
        }
        None
    };
    let mut displacements = Vec::with_capacity(selection.len() - 1);
    let mut prev: Option<Point2<f64>> = None;
    for &frame in selection {
        let Some(foe) = foe_of(frame) else { continue };
        if let Some(p) = prev {
            displacements.push((foe - p).norm());
        }
        prev = Some(foe);
    }
    if displacements.is_empty() {
        return (0.0, max_jitter);
    }
    let jitter = displacements.iter().sum::<f64>() / displacements.len() as f64;
    (jitter, max_jitter)
}

/// Everything the graph-weight fitness needs besides the candidate weights.
pub struct GraphFitnessContext<'a> {
    pub stream: &'a FeatureStream,
    pub scores: &'a [f64],
    pub tree: &'a SegmentTree,
    pub costs: &'a [SegmentCosts],
    pub base_weights: GraphWeights,
    pub required: f64,
    /// Expected output length, `L / F_d`.
    pub expected_len: f64,
    /// Sum of the top-`ceil(L / F_d)` frame scores.
    pub max_semantic: f64,
    pub penalty: f64,
}

impl<'a> GraphFitnessContext<'a> {
    pub fn new(
        stream: &'a FeatureStream,
        scores: &'a [f64],
        tree: &'a SegmentTree,
        costs: &'a [SegmentCosts],
        base_weights: GraphWeights,
        required: f64,
        penalty: f64,
    ) -> Self {
        let expected_len = stream.len() as f64 / required;
        let max_semantic = top_n_score_sum(scores, expected_len.ceil() as usize);
        GraphFitnessContext {
            stream,
            scores,
            tree,
            costs,
            base_weights,
            required,
            expected_len,
            max_semantic,
            penalty,
        }
    }
}

/// Sum of the `n` largest scores.
pub fn top_n_score_sum(scores: &[f64], n: usize) -> f64 {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.iter().take(n).sum()
}

/// Evaluates the three-term selection quality of the candidate graph
/// weights: normalized jitter, length error, and lost semantic content.
pub fn fitness_graph_weights(position: &[f64], ctx: &GraphFitnessContext<'_>) -> f64 {
    let weights = ctx
        .base_weights
        .with_lambdas([position[0], position[1], position[2], position[3]]);
    let outcome = match select_frames_cached(ctx.costs, ctx.tree, &weights) {
        Ok(o) => o,
        Err(_) => return ctx.penalty,
    };
    selection_fitness(&outcome.selection, ctx)
}

/// The Eq.-style three-term score of an arbitrary selection.
pub fn selection_fitness(selection: &[usize], ctx: &GraphFitnessContext<'_>) -> f64 {
    if selection.is_empty() {
        return ctx.penalty;
    }
    let (jitter, max_jitter) = compute_jitter(ctx.stream, selection);
    let jitter_term = if max_jitter > 0.0 {
        jitter / max_jitter
    } else {
        0.0
    };
    let length_term =
        ((selection.len() as f64 - ctx.expected_len) / ctx.expected_len).abs();
    let semantics: f64 = selection.iter().map(|&f| ctx.scores[f]).sum();
    let semantic_term = if ctx.max_semantic > 0.0 {
        (ctx.max_semantic - semantics) / ctx.max_semantic
    } else {
        0.0
    };
    jitter_term + length_term + semantic_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameFeatures;
    use approx::assert_relative_eq;

    fn sphere(pos: &[f64]) -> f64 {
        pos.iter().map(|x| x * x).sum()
    }

    #[test]
    fn pso_minimizes_sphere() {
        let cfg = PsoConfig {
            iterations: 200,
            ..PsoConfig::standard(vec![(-5.0, 5.0); 2], 42)
        };
        let result = pso_optimize(&sphere, &cfg).unwrap();
        assert!(result.fitness < 1e-3, "fitness {}", result.fitness);
    }

    #[test]
    fn pso_trace_is_monotone_non_increasing() {
        let cfg = PsoConfig::standard(vec![(-5.0, 5.0); 3], 7);
        let result = pso_optimize(&sphere, &cfg).unwrap();
        for pair in result.trace.windows(2) {
            assert!(pair[1].fitness <= pair[0].fitness);
        }
    }

    #[test]
    fn pso_initialized_at_optimum_stays_there() {
        let cfg = PsoConfig {
            init: Some(vec![vec![0.0, 0.0]; 30]),
            ..PsoConfig::standard(vec![(-5.0, 5.0); 2], 3)
        };
        let result = pso_optimize(&sphere, &cfg).unwrap();
        for point in &result.trace {
            assert_eq!(point.fitness, 0.0);
            assert_eq!(point.position, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn pso_same_seed_same_trace() {
        let cfg = PsoConfig::standard(vec![(-2.0, 8.0); 2], 99);
        let a = pso_optimize(&sphere, &cfg).unwrap();
        let b = pso_optimize(&sphere, &cfg).unwrap();
        assert_eq!(a.position, b.position);
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.fitness, y.fitness);
            assert_eq!(x.position, y.position);
        }
    }

    #[test]
    fn pso_rejects_non_finite_fitness() {
        let bad = |_: &[f64]| f64::NAN;
        let cfg = PsoConfig::standard(vec![(0.0, 1.0)], 1);
        assert!(pso_optimize(&bad, &cfg).is_err());
    }

    #[test]
    fn rate_fitness_hand_computed() {
        // L_s = L_ns = 1000, F_d = 10, pair (6, 30):
        // 2*|6 - 7.5| + |10 - 10| + 0.5*|6 - 30| = 15
        let f = rate_pair_fitness(6, 30, 1000, 1000, 10.0);
        assert_relative_eq!(f, 15.0, epsilon = 1e-9);
    }

    #[test]
    fn rate_fitness_vanishes_at_uniform_semantic_video() {
        // p_s = 1: target collapses to F_d and the spread term has weight 0
        let f = rate_pair_fitness(10, 10, 5000, 0, 10.0);
        assert_relative_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_fitness_spread_term_vanishes_without_ns_frames() {
        // p_ns = 0: 2*|6 - 10| + |achieved - 10| + 0 where achieved = 6
        let f = rate_pair_fitness(6, 30, 1000, 0, 10.0);
        assert_relative_eq!(f, 8.0 + 4.0, epsilon = 1e-9);
    }

    fn foe_frame(index: usize, foe: Option<[f64; 2]>) -> FrameFeatures {
        FrameFeatures {
            frame_index: index,
            width: 100,
            height: 100,
            detections: vec![],
            keypoints: vec![],
            foe,
            flow_mean_magnitude: 0.0,
            histogram: vec![1.0],
            raster: None,
            score: None,
        }
    }

    #[test]
    fn jitter_identical_foes_is_zero() {
        let frames = (0..6).map(|i| foe_frame(i, Some([30.0, 30.0]))).collect();
        let stream = FeatureStream::new(10.0, frames).unwrap();
        let (j, _) = compute_jitter(&stream, &[0, 2, 4]);
        assert_eq!(j, 0.0);
    }

    #[test]
    fn jitter_opposite_corners_hits_max() {
        let frames = (0..6)
            .map(|i| {
                let foe = if i % 2 == 0 { [0.0, 0.0] } else { [100.0, 100.0] };
                foe_frame(i, Some(foe))
            })
            .collect();
        let stream = FeatureStream::new(10.0, frames).unwrap();
        let (j, max_j) = compute_jitter(&stream, &[0, 1, 2, 3]);
        assert_relative_eq!(j, max_j, epsilon = 1e-9);
        assert_relative_eq!(max_j, (2.0f64 * 100.0 * 100.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn jitter_single_frame_is_zero() {
        let frames = (0..3).map(|i| foe_frame(i, Some([5.0, 5.0]))).collect();
        let stream = FeatureStream::new(10.0, frames).unwrap();
        assert_eq!(compute_jitter(&stream, &[1]).0, 0.0);
    }

    #[test]
    fn jitter_missing_foe_uses_preceding() {
        let frames = vec![
            foe_frame(0, Some([10.0, 10.0])),
            foe_frame(1, None),
            foe_frame(2, Some([40.0, 50.0])),
        ];
        let stream = FeatureStream::new(10.0, frames).unwrap();
        // frame 1 inherits frame 0's FOE: displacements are 0 then 50
        let (j, _) = compute_jitter(&stream, &[0, 1, 2]);
        assert_relative_eq!(j, 25.0, epsilon = 1e-9);
    }

    #[test]
    fn top_n_sum_takes_largest() {
        assert_eq!(top_n_score_sum(&[1.0, 5.0, 3.0, 2.0], 2), 8.0);
        assert_eq!(top_n_score_sum(&[1.0], 5), 1.0);
    }
}
