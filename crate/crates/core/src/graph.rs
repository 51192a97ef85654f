//! Per-segment transition graphs: cost terms, weighted skip edges and the
//! minimal-cost frame chain.
//!
//! Every segment becomes a DAG whose nodes are frames and whose edges are
//! forward skips of up to `max_skip` frames. Edge weights combine four cost
//! terms scaled by the skip-to-rate ratio; a source and a sink tied to the
//! border frames with zero-weight edges close the construction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStream;
use crate::profile::{Segment, SegmentTree};

/// Regularization weights and structural parameters for graph building.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphWeights {
    pub instability: f64,
    pub velocity: f64,
    pub appearance: f64,
    pub semantic: f64,
    /// Stabilizer of the semantic cost denominator.
    pub epsilon: f64,
    /// Longest allowed skip, in frames.
    pub max_skip: usize,
    /// Source/sink border width, in frames.
    pub border: usize,
}

impl Default for GraphWeights {
    fn default() -> Self {
        GraphWeights {
            instability: 1.0,
            velocity: 1.0,
            appearance: 1.0,
            semantic: 1.0,
            epsilon: 1.0,
            max_skip: 100,
            border: 30,
        }
    }
}

impl GraphWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.instability,
            self.velocity,
            self.appearance,
            self.semantic,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidArgument(
                "graph weights must be non-negative".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_skip < 1 {
            return Err(Error::InvalidArgument("max skip must be at least 1".into()));
        }
        if self.border < 1 || self.border > self.max_skip {
            return Err(Error::InvalidArgument(
                "border width must lie in [1, max_skip]".into(),
            ));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> [f64; 4] {
        [
            self.instability,
            self.velocity,
            self.appearance,
            self.semantic,
        ]
    }

    pub fn with_lambdas(&self, lambdas: [f64; 4]) -> GraphWeights {
        GraphWeights {
            instability: lambdas[0],
            velocity: lambdas[1],
            appearance: lambdas[2],
            semantic: lambdas[3],
            ..*self
        }
    }
}

// --- focus of expansion -------------------------------------------------------

/// Outcome of the least-squares FOE intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FoeEstimate {
    Point { foe: Point2<f64>, residual: f64 },
    /// The flow field is (numerically) parallel; no finite intersection.
    Degenerate,
}

/// Least-squares intersection of the lines through each flow position along
/// its displacement. Zero-length displacements are skipped.
pub fn estimate_foe(flows: &[(Point2<f64>, Vector2<f64>)]) -> Result<FoeEstimate> {
    let mut usable = Vec::with_capacity(flows.len());
    for (p, d) in flows {
        if !(p.x.is_finite() && p.y.is_finite() && d.x.is_finite() && d.y.is_finite()) {
            return Err(Error::InvalidArgument("non-finite flow vector".into()));
        }
        let norm = d.norm();
        if norm > 1e-12 {
            usable.push((*p, *d / norm));
        }
    }
    if usable.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two non-zero flow vectors".into(),
        ));
    }
    // Each line contributes the normal equation n (n . x) = n (n . p).
    let mut a = Matrix2::<f64>::zeros();
    let mut b = Vector2::<f64>::zeros();
    for (p, dir) in &usable {
        let n = Vector2::new(-dir.y, dir.x);
        a += n * n.transpose();
        b += n * (n.x * p.x + n.y * p.y);
    }
    // Parallel field: the normal matrix is rank one.
    let trace = a.trace();
    let det = a.determinant();
    if det <= 1e-12 * trace * trace {
        return Ok(FoeEstimate::Degenerate);
    }
    let foe = a.try_inverse().ok_or_else(|| {
        Error::Internal("normal matrix inversion failed after rank check".into())
    })? * b;
    let residual = (usable
        .iter()
        .map(|(p, dir)| {
            let n = Vector2::new(-dir.y, dir.x);
            let r = n.x * (foe.x - p.x) + n.y * (foe.y - p.y);
            r * r
        })
        .sum::<f64>()
        / usable.len() as f64)
        .sqrt();
    Ok(FoeEstimate::Point {
        foe: Point2::new(foe.x, foe.y),
        residual,
    })
}

/// FOE with the documented fallback: a parallel (or empty) field reports the
/// frame center displaced by the mean flow.
pub fn foe_or_fallback(
    flows: &[(Point2<f64>, Vector2<f64>)],
    width: f64,
    height: f64,
) -> Point2<f64> {
    let center = Point2::new(width / 2.0, height / 2.0);
    match estimate_foe(flows) {
        Ok(FoeEstimate::Point { foe, .. }) => foe,
        _ => {
            let n = flows.len().max(1) as f64;
            let mean: Vector2<f64> = flows.iter().map(|(_, d)| *d).sum::<Vector2<f64>>() / n;
            center + mean
        }
    }
}

// --- cost terms ----------------------------------------------------------------

/// Mean FOE distance from the frame center over frames `[i, j)`, normalized
/// by the half-diagonal.
pub fn instability_cost(stream: &FeatureStream, i: usize, j: usize) -> Result<f64> {
    debug_assert!(i < j);
    let mut acc = 0.0;
    for k in i..j {
        let frame = stream.frame(k);
        let [fx, fy] = frame.foe.ok_or(Error::MissingFeature {
            frame: k,
            feature: "focus of expansion",
        })?;
        let center = frame.center();
        let dist = ((fx - center.x).powi(2) + (fy - center.y).powi(2)).sqrt();
        acc += dist / frame.half_diagonal();
    }
    Ok(acc / (j - i) as f64)
}

/// Deviation of the flow accumulated across the skip from the whole-video
/// mean scaled by the segment rate, normalized by that target.
pub fn velocity_cost(
    stream: &FeatureStream,
    i: usize,
    j: usize,
    video_mean_magnitude: f64,
    rate: u32,
) -> Result<f64> {
    debug_assert!(i < j);
    let target = video_mean_magnitude * f64::from(rate);
    if target <= 0.0 {
        return Ok(0.0); // static video
    }
    let accumulated: f64 = (i..j).map(|k| stream.frame(k).flow_mean_magnitude).sum();
    Ok((target - accumulated).abs() / target)
}

/// 1-D earth mover's distance between normalized histograms, scaled into
/// [0, 1] by the bin count.
pub fn appearance_cost(hist_i: &[f64], hist_j: &[f64]) -> Result<f64> {
    if hist_i.len() != hist_j.len() {
        return Err(Error::InvalidArgument(format!(
            "histogram lengths differ: {} vs {}",
            hist_i.len(),
            hist_j.len()
        )));
    }
    let bins = hist_i.len();
    if bins < 2 {
        return Ok(0.0);
    }
    let mut cdf_i = 0.0;
    let mut cdf_j = 0.0;
    let mut emd = 0.0;
    for b in 0..bins {
        cdf_i += hist_i[b];
        cdf_j += hist_j[b];
        emd += (cdf_i - cdf_j).abs();
    }
    Ok(emd / (bins - 1) as f64)
}

/// `1 / (S_i + S_j + epsilon)`: penalizes transitions between low-scoring
/// frames.
pub fn semantic_cost(score_i: f64, score_j: f64, epsilon: f64) -> Result<f64> {
    if score_i < 0.0 || score_j < 0.0 {
        return Err(Error::InvalidArgument(
            "semantic scores must be non-negative".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    Ok(1.0 / (score_i + score_j + epsilon))
}

/// Combines the four cost terms and the skip multiplier `ceil((j-i)/F)`.
pub fn edge_weight(
    costs: [f64; 4],
    weights: &GraphWeights,
    i: usize,
    j: usize,
    rate: u32,
) -> f64 {
    let base = weights.instability * costs[0]
        + weights.velocity * costs[1]
        + weights.appearance * costs[2]
        + weights.semantic * costs[3];
    let multiplier = (j - i).div_ceil(rate as usize) as f64;
    base * multiplier
}

// --- graph ----------------------------------------------------------------------

/// The lambda-independent cost tuples of one segment, reusable across
/// candidate weightings.
#[derive(Debug, Clone)]
pub struct SegmentCosts {
    pub start: usize,
    pub end: usize,
    pub max_skip: usize,
    /// `(from, to, [instability, velocity, appearance, semantic])`, with
    /// `from < to` both absolute frame indices.
    pub edges: Vec<(u32, u32, [f64; 4])>,
}

/// Evaluates all four cost terms for every skip edge of a segment.
pub fn compute_segment_costs(
    stream: &FeatureStream,
    scores: &[f64],
    video_mean_magnitude: f64,
    segment: &Segment,
    weights: &GraphWeights,
    rate: u32,
) -> Result<SegmentCosts> {
    weights.validate()?;
    if rate == 0 {
        return Err(Error::InvalidArgument("segment rate must be at least 1".into()));
    }
    let (start, end) = (segment.start, segment.end);
    let n = end - start;
    let mut edges = Vec::new();
    if n >= 2 {
        // prefix sums over flow magnitude keep the velocity term O(1) per edge
        let mut flow_prefix = vec![0.0; n];
        let mut foe_prefix = vec![0.0; n];
        for (k, frame_idx) in (start..end).enumerate() {
            let frame = stream.frame(frame_idx);
            let flow = frame.flow_mean_magnitude;
            let [fx, fy] = frame.foe.ok_or(Error::MissingFeature {
                frame: frame_idx,
                feature: "focus of expansion",
            })?;
            let center = frame.center();
            let foe_dist = ((fx - center.x).powi(2) + (fy - center.y).powi(2)).sqrt()
                / frame.half_diagonal();
            flow_prefix[k] = flow + if k > 0 { flow_prefix[k - 1] } else { 0.0 };
            foe_prefix[k] = foe_dist + if k > 0 { foe_prefix[k - 1] } else { 0.0 };
        }
        let prefix = |p: &[f64], a: usize, b: usize| -> f64 {
            // sum over local indices [a, b)
            p[b - 1] - if a > 0 { p[a - 1] } else { 0.0 }
        };
        let target = video_mean_magnitude * f64::from(rate);
        for li in 0..n - 1 {
            let hi = (li + weights.max_skip).min(n - 1);
            for lj in li + 1..=hi {
                let (i, j) = (start + li, start + lj);
                let instability = prefix(&foe_prefix, li, lj) / (lj - li) as f64;
                let velocity = if target <= 0.0 {
                    0.0
                } else {
                    (target - prefix(&flow_prefix, li, lj)).abs() / target
                };
                let appearance =
                    appearance_cost(&stream.frame(i).histogram, &stream.frame(j).histogram)?;
                let semantic = semantic_cost(scores[i], scores[j], weights.epsilon)?;
                edges.push((i as u32, j as u32, [instability, velocity, appearance, semantic]));
            }
        }
    }
    Ok(SegmentCosts {
        start,
        end,
        max_skip: weights.max_skip,
        edges,
    })
}

/// A segment's weighted DAG with source and sink attached to the borders.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    pub start: usize,
    pub end: usize,
    pub rate: u32,
    /// Adjacency by node id: 0 = source, 1..=n frames, n+1 = sink.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TransitionGraph {
    fn frame_count(&self) -> usize {
        self.end - self.start
    }

    /// Outgoing edges of a node id (0 = source, 1..=n frames, n+1 = sink).
    pub fn adjacency(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Count of graph nodes excluding source and sink.
    pub fn frames(&self) -> usize {
        self.frame_count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Skip edges only (source/sink links excluded).
    pub fn skip_edge_count(&self) -> usize {
        let n = self.frame_count();
        self.adjacency[1..=n]
            .iter()
            .map(|adj| adj.iter().filter(|(to, _)| *to <= n).count())
            .sum()
    }
}

/// Assembles the weighted graph from precomputed costs.
pub fn build_graph(
    costs: &SegmentCosts,
    weights: &GraphWeights,
    rate: u32,
) -> Result<TransitionGraph> {
    weights.validate()?;
    if rate == 0 {
        return Err(Error::InvalidArgument("segment rate must be at least 1".into()));
    }
    let (start, end) = (costs.start, costs.end);
    let n = end - start;
    let sink = n + 1;
    let mut adjacency = vec![Vec::new(); n + 2];
    for &(i, j, terms) in &costs.edges {
        let w = edge_weight(terms, weights, i as usize, j as usize, rate);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Internal(format!(
                "edge ({i}, {j}) has invalid weight {w}"
            )));
        }
        let from = i as usize - start + 1;
        let to = j as usize - start + 1;
        adjacency[from].push((to, w));
    }
    let border = weights.border.min(n);
    for k in 0..border {
        adjacency[0].push((k + 1, 0.0)); // source to leading border
        adjacency[n - k].push((sink, 0.0)); // trailing border to sink
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|&(to, _)| to);
    }
    Ok(TransitionGraph {
        start,
        end,
        rate,
        adjacency,
    })
}

/// Convenience: costs plus assembly in one call.
pub fn build_graph_from_stream(
    stream: &FeatureStream,
    scores: &[f64],
    video_mean_magnitude: f64,
    segment: &Segment,
    weights: &GraphWeights,
    rate: u32,
) -> Result<TransitionGraph> {
    let costs = compute_segment_costs(stream, scores, video_mean_magnitude, segment, weights, rate)?;
    build_graph(&costs, weights, rate)
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap and we pop smallest cost first,
        // then smallest node id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the segment graph. Returns the minimal-cost frame chain
/// (source and sink stripped); exact cost ties resolve to the
/// lexicographically smallest frame sequence.
pub fn shortest_path(graph: &TransitionGraph) -> Result<Vec<usize>> {
    let n = graph.frame_count();
    if n == 0 {
        return Err(Error::InvalidArgument("empty segment".into()));
    }
    if n == 1 {
        return Ok(vec![graph.start]);
    }
    let sink = n + 1;
    let mut dist = vec![f64::INFINITY; n + 2];
    let mut parent = vec![usize::MAX; n + 2];
    let mut done = vec![false; n + 2];
    dist[0] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { cost: 0.0, node: 0 });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if done[node] || cost > dist[node] {
            continue;
        }
        done[node] = true;
        if node == sink {
            break;
        }
        for &(to, w) in &graph.adjacency[node] {
            let candidate = cost + w;
            if candidate < dist[to] {
                dist[to] = candidate;
                parent[to] = node;
                heap.push(HeapEntry {
                    cost: candidate,
                    node: to,
                });
            } else if candidate == dist[to]
                && !done[to]
                && parent[to] != usize::MAX
                && lex_smaller(&parent, node, parent[to], to)
            {
                parent[to] = node;
            }
        }
    }
    if !dist[sink].is_finite() {
        return Err(Error::Internal(
            "sink unreachable in a validated transition graph".into(),
        ));
    }
    let mut path = Vec::new();
    let mut node = parent[sink];
    while node != usize::MAX && node != 0 {
        path.push(graph.start + node - 1);
        node = parent[node];
    }
    path.reverse();
    if path.is_empty() {
        return Err(Error::Internal("shortest path skipped every frame".into()));
    }
    Ok(path)
}

/// Compares the source-rooted paths through predecessors `a` and `b` into
/// `to`, lexicographically by frame sequence. Appending `to` before the
/// comparison keeps prefix-shaped candidates ordered correctly.
fn lex_smaller(parent: &[usize], a: usize, b: usize, to: usize) -> bool {
    let walk = |mut node: usize| {
        let mut rev = vec![to];
        while node != usize::MAX && node != 0 {
            rev.push(node);
            node = parent[node];
        }
        rev.reverse();
        rev
    };
    walk(a) < walk(b)
}

/// Concatenates per-leaf paths into the global frame selection.
pub fn compose_selection(leaves: &[Segment], paths: &[Vec<usize>]) -> Result<Vec<usize>> {
    if leaves.len() != paths.len() {
        return Err(Error::InvalidArgument(
            "one path per leaf segment is required".into(),
        ));
    }
    let mut order: Vec<usize> = (0..leaves.len()).collect();
    order.sort_by_key(|&i| leaves[i].start);
    let mut selection = Vec::new();
    for idx in order {
        for &frame in &paths[idx] {
            if selection.last().is_some_and(|&last| frame <= last) {
                return Err(Error::Internal(format!(
                    "selection is not strictly increasing at frame {frame}"
                )));
            }
            selection.push(frame);
        }
    }
    Ok(selection)
}

/// Builds, solves and composes every leaf of a segment tree. Leaves run
/// concurrently; results are reduced in temporal order.
pub fn select_frames(
    stream: &FeatureStream,
    scores: &[f64],
    tree: &SegmentTree,
    weights: &GraphWeights,
) -> Result<SelectionOutcome> {
    let video_mean = stream.mean_flow_magnitude();
    let costs = segment_cost_cache(stream, scores, video_mean, tree, weights)?;
    select_frames_cached(&costs, tree, weights)
}

/// Per-leaf cost tables for reuse across candidate weightings.
pub fn segment_cost_cache(
    stream: &FeatureStream,
    scores: &[f64],
    video_mean_magnitude: f64,
    tree: &SegmentTree,
    weights: &GraphWeights,
) -> Result<Vec<SegmentCosts>> {
    use rayon::prelude::*;
    tree.leaves
        .par_iter()
        .map(|leaf| {
            let rate = leaf.speedup.ok_or_else(|| {
                Error::Internal(format!(
                    "leaf [{}, {}) carries no speed-up",
                    leaf.start, leaf.end
                ))
            })?;
            compute_segment_costs(stream, scores, video_mean_magnitude, leaf, weights, rate)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selection: Vec<usize>,
    /// Per-leaf shortest-path costs, in leaf order.
    pub path_costs: Vec<f64>,
}

/// Solves every cached leaf with the given weights.
pub fn select_frames_cached(
    costs: &[SegmentCosts],
    tree: &SegmentTree,
    weights: &GraphWeights,
) -> Result<SelectionOutcome> {
    use rayon::prelude::*;
    let solved: Vec<(Vec<usize>, f64)> = tree
        .leaves
        .par_iter()
        .zip(costs.par_iter())
        .map(|(leaf, cost)| {
            let rate = leaf.speedup.expect("validated by the cost cache");
            let graph = build_graph(cost, weights, rate)?;
            let path = shortest_path(&graph)?;
            let total = path_cost(&graph, &path);
            Ok((path, total))
        })
        .collect::<Result<_>>()?;
    let paths: Vec<Vec<usize>> = solved.iter().map(|(p, _)| p.clone()).collect();
    let path_costs = solved.iter().map(|(_, c)| *c).collect();
    let selection = compose_selection(&tree.leaves, &paths)?;
    Ok(SelectionOutcome {
        selection,
        path_costs,
    })
}

/// Total weight of a frame chain, including the zero-weight border links.
fn path_cost(graph: &TransitionGraph, path: &[usize]) -> f64 {
    let mut total = 0.0;
    for w in path.windows(2) {
        let from = w[0] - graph.start + 1;
        let to = w[1] - graph.start + 1;
        if let Some((_, weight)) = graph.adjacency[from].iter().find(|(t, _)| *t == to) {
            total += weight;
        }
    }
    total
}
