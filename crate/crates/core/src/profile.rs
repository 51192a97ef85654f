//! Semantic profile smoothing, thresholding and multi-importance
//! segmentation.
//!
//! The smoothed profile is thresholded with Otsu's method; frames above the
//! threshold form semantic segments, which are then re-segmented iteratively
//! so stronger content ends up in deeper levels with lower speed-ups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speedup::SpeedupSolution;

/// Raw and smoothed per-frame scores plus the smoothing context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticProfile {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub fps: f64,
    pub required_speedup: f64,
}

impl SemanticProfile {
    pub fn new(raw: Vec<f64>, fps: f64, required_speedup: f64) -> Result<Self> {
        let smoothed = smooth_profile(&raw, fps, required_speedup)?;
        Ok(SemanticProfile {
            raw,
            smoothed,
            fps,
            required_speedup,
        })
    }

    /// Assembles a profile from an already-smoothed score vector.
    pub fn from_parts(
        raw: Vec<f64>,
        smoothed: Vec<f64>,
        fps: f64,
        required_speedup: f64,
    ) -> Result<Self> {
        if raw.len() != smoothed.len() {
            return Err(Error::InvalidArgument(
                "raw and smoothed profiles must have the same length".into(),
            ));
        }
        if smoothed.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "smoothed scores must be finite".into(),
            ));
        }
        Ok(SemanticProfile {
            raw,
            smoothed,
            fps,
            required_speedup,
        })
    }
}

/// Gaussian smoothing with sigma = (required_speedup / 2) * fps samples,
/// kernel truncated at three sigma and renormalized, reflective boundaries.
pub fn smooth_profile(raw: &[f64], fps: f64, required_speedup: f64) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument("fps must be positive".into()));
    }
    if !(required_speedup >= 1.0) {
        return Err(Error::InvalidArgument(
            "required speed-up must be at least 1".into(),
        ));
    }
    let sigma = required_speedup / 2.0 * fps;
    let kernel = gaussian_kernel(sigma);
    Ok(convolve_reflect(raw, &kernel))
}

/// Unit-sum Gaussian kernel truncated at +-3 sigma (odd length).
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for offset in -(radius as isize)..=(radius as isize) {
        let d = offset as f64;
        kernel.push((-d * d / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Reflects an out-of-range index back into `0..n` ("abc|cba" style),
/// folding as often as needed for kernels wider than the signal.
fn reflect(mut idx: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if idx < 0 {
            idx = -idx - 1;
        } else if idx >= n {
            idx = 2 * n - 1 - idx;
        } else {
            return idx as usize;
        }
    }
}

pub(crate) fn convolve_reflect(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let radius = kernel.len() / 2;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (k, &w) in kernel.iter().enumerate() {
            let idx = i as isize + k as isize - radius as isize;
            acc += w * signal[reflect(idx, n)];
        }
        out[i] = acc;
    }
    out
}

/// Otsu's threshold over a histogram of the scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OtsuOutcome {
    /// Bin-edge threshold maximizing between-class variance; frames scoring
    /// strictly above `value` are semantic.
    Threshold { value: f64, bin: usize },
    /// All scores identical (single-class histogram): the caller treats the
    /// whole range as non-semantic.
    Degenerate,
}

pub fn otsu_threshold(scores: &[f64], num_bins: usize) -> Result<OtsuOutcome> {
    if num_bins < 2 {
        return Err(Error::InvalidArgument(
            "otsu needs at least two bins".into(),
        ));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Ok(OtsuOutcome::Degenerate);
    }
    let width = (max - min) / num_bins as f64;
    let mut hist = vec![0u64; num_bins];
    for &s in scores {
        let bin = (((s - min) / width) as usize).min(num_bins - 1);
        hist[bin] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Ok(OtsuOutcome::Degenerate);
    }

    let total = scores.len() as f64;
    let total_mass: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| b as f64 * c as f64)
        .sum();
    let mut below_count = 0.0;
    let mut below_mass = 0.0;
    let mut best = (f64::NEG_INFINITY, 0usize);
    // Split after bin `b`: classes [0..=b] and [b+1..]. Ties keep the lowest
    // split so more frames land on the semantic side.
    for b in 0..num_bins - 1 {
        below_count += hist[b] as f64;
        below_mass += b as f64 * hist[b] as f64;
        let above_count = total - below_count;
        if below_count == 0.0 {
            continue;
        }
        if above_count == 0.0 {
            break;
        }
        let mean_below = below_mass / below_count;
        let mean_above = (total_mass - below_mass) / above_count;
        let variance =
            below_count * above_count * (mean_below - mean_above) * (mean_below - mean_above);
        if variance > best.0 {
            best = (variance, b);
        }
    }
    let bin = best.1;
    Ok(OtsuOutcome::Threshold {
        value: min + width * (bin + 1) as f64,
        bin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Semantic,
    NonSemantic,
}

/// A half-open frame range with its importance level and assigned speed-up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    /// 0 for non-semantic, 1.. for increasingly important semantic levels.
    pub level: u32,
    pub speedup: Option<u32>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Splits a smoothed profile at `threshold` into alternating segments.
///
/// Semantic runs separated by at most five seconds are merged (the gap joins
/// the semantic segment); merged runs shorter than one second of output at
/// `required_speedup` are demoted to non-semantic.
pub fn extract_segments(
    smoothed: &[f64],
    threshold: f64,
    fps: f64,
    required_speedup: f64,
) -> Result<Vec<Segment>> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument("threshold must be finite".into()));
    }
    let labels: Vec<bool> = smoothed.iter().map(|&s| s > threshold).collect();
    Ok(segments_from_labels(&labels, fps, required_speedup))
}

/// Shared run/merge/demote logic over a boolean labeling. Indices are local
/// to the labeling; callers map them back onto the stream.
pub(crate) fn segments_from_labels(labels: &[bool], fps: f64, required_speedup: f64) -> Vec<Segment> {
    let n = labels.len();
    if n == 0 {
        return vec![];
    }
    // maximal semantic runs
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if labels[i] {
            let start = i;
            while i < n && labels[i] {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }
    // merge runs separated by <= 5 seconds, absorbing the gap
    let merge_gap = 5.0 * fps;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if (run.0 - last.1) as f64 <= merge_gap => last.1 = run.1,
            _ => merged.push(run),
        }
    }
    // demote runs shorter than one output-second
    let min_len = required_speedup * fps;
    merged.retain(|run| (run.1 - run.0) as f64 >= min_len);

    // tile [0, n) with alternating segments
    let mut segments = Vec::new();
    let mut cursor = 0;
    for (start, end) in merged {
        if start > cursor {
            segments.push(Segment {
                start: cursor,
                end: start,
                kind: SegmentKind::NonSemantic,
                level: 0,
                speedup: None,
            });
        }
        segments.push(Segment {
            start,
            end,
            kind: SegmentKind::Semantic,
            level: 1,
            speedup: None,
        });
        cursor = end;
    }
    if cursor < n {
        segments.push(Segment {
            start: cursor,
            end: n,
            kind: SegmentKind::NonSemantic,
            level: 0,
            speedup: None,
        });
    }
    segments
}

/// The nested multi-importance segmentation: thresholds per applied
/// iteration, the per-level segment lists, and the final flat leaf tiling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentTree {
    pub thresholds: Vec<f64>,
    pub stop_ratio: f64,
    pub levels: Vec<Vec<Segment>>,
    pub leaves: Vec<Segment>,
}

impl SegmentTree {
    pub fn max_level(&self) -> u32 {
        self.leaves.iter().map(|s| s.level).max().unwrap_or(0)
    }

    /// Speed-up assigned to a level (identical across its leaves).
    pub fn level_speedup(&self, level: u32) -> Option<u32> {
        self.leaves
            .iter()
            .find(|s| s.level == level)
            .and_then(|s| s.speedup)
    }
}

/// A pluggable solver for the two-rate assignment problem; the refinement
/// calls it once per iteration.
pub type SpeedupSolver<'a> =
    dyn Fn(usize, usize, f64, Option<f64>) -> Result<SpeedupSolution> + 'a;

/// Iterative multi-importance refinement.
///
/// The first pass fixes the non-semantic rate. Each later pass drops the
/// non-semantic frames, re-thresholds the survivors and re-solves with the
/// previous semantic rate as the new required rate; it stops when the new
/// threshold falls below `stop_ratio` times the previous one, on a
/// degenerate profile, or when a split stops separating rates.
pub fn refine_multi_importance(
    profile: &SemanticProfile,
    stop_ratio: f64,
    num_bins: usize,
    solver: &SpeedupSolver<'_>,
) -> Result<SegmentTree> {
    if !(stop_ratio > 0.0 && stop_ratio < 1.0) {
        return Err(Error::InvalidArgument(
            "stop ratio must lie strictly between 0 and 1".into(),
        ));
    }
    let n = profile.smoothed.len();
    let required = profile.required_speedup;
    let fps = profile.fps;
    // Deepest integer speed-up that still counts as semantic emphasis.
    let semantic_cap = (required.ceil() - 1.0).max(1.0);

    let mut tree = SegmentTree {
        thresholds: Vec::new(),
        stop_ratio,
        levels: Vec::new(),
        leaves: Vec::new(),
    };

    let all_non_semantic = |tree: &mut SegmentTree| -> Result<()> {
        let solution = solver(0, n, required, None)?;
        tree.leaves = vec![Segment {
            start: 0,
            end: n,
            kind: SegmentKind::NonSemantic,
            level: 0,
            speedup: Some(solution.non_semantic),
        }];
        tree.levels = vec![tree.leaves.clone()];
        Ok(())
    };

    let first_threshold = match otsu_threshold(&profile.smoothed, num_bins)? {
        OtsuOutcome::Threshold { value, .. } => value,
        OtsuOutcome::Degenerate => {
            all_non_semantic(&mut tree)?;
            return Ok(tree);
        }
    };
    let mut segments = extract_segments(&profile.smoothed, first_threshold, fps, required)?;
    let semantic_frames: usize = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Semantic)
        .map(Segment::len)
        .sum();
    if semantic_frames == 0 {
        all_non_semantic(&mut tree)?;
        return Ok(tree);
    }
    tree.thresholds.push(first_threshold);

    let first = solver(semantic_frames, n - semantic_frames, required, None)?;
    for seg in &mut segments {
        seg.speedup = Some(match seg.kind {
            SegmentKind::Semantic => first.semantic,
            SegmentKind::NonSemantic => first.non_semantic,
        });
    }
    tree.levels.push(
        segments
            .iter()
            .filter(|s| s.level == 0)
            .cloned()
            .collect(),
    );
    tree.levels.push(
        segments
            .iter()
            .filter(|s| s.level == 1)
            .cloned()
            .collect(),
    );
    let mut leaves = segments;
    let mut current_level = 1u32;
    let mut current_rate = first.semantic;
    let mut prev_shallow_rate = first.non_semantic;
    let mut last_threshold = first_threshold;

    loop {
        // surviving frames: the deepest level so far, in temporal order
        let deepest: Vec<usize> = leaves
            .iter()
            .enumerate()
            .filter(|(_, s)| s.level == current_level)
            .map(|(i, _)| i)
            .collect();
        let mut frame_map: Vec<usize> = Vec::new();
        let mut scores: Vec<f64> = Vec::new();
        for &si in &deepest {
            let seg = &leaves[si];
            for f in seg.start..seg.end {
                frame_map.push(f);
                scores.push(profile.smoothed[f]);
            }
        }
        if scores.is_empty() {
            break;
        }
        let threshold = match otsu_threshold(&scores, num_bins)? {
            OtsuOutcome::Threshold { value, .. } => value,
            OtsuOutcome::Degenerate => break,
        };
        if threshold < stop_ratio * last_threshold {
            break;
        }
        if f64::from(current_rate) > semantic_cap {
            break; // no integer room left below the required rate
        }
        let labels: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
        let sub = segments_from_labels(&labels, fps, f64::from(current_rate));
        let deep_frames: usize = sub
            .iter()
            .filter(|s| s.kind == SegmentKind::Semantic)
            .map(Segment::len)
            .sum();
        if deep_frames == 0 || deep_frames == scores.len() {
            break; // the split did not separate anything
        }
        let solution = match solver(
            deep_frames,
            scores.len() - deep_frames,
            f64::from(current_rate),
            Some(semantic_cap),
        ) {
            Ok(s) => s,
            // The cap can empty the box; that just means no deeper level fits.
            Err(Error::Infeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        // The whole level chain must stay strictly ordered: deeper levels run
        // strictly slower than shallower ones.
        if solution.semantic >= solution.non_semantic
            || solution.non_semantic >= prev_shallow_rate
        {
            break;
        }

        // map the sub-segments back onto original frame indices and rebuild
        // the leaf tiling
        let next_level = current_level + 1;
        let mut replacement: Vec<Segment> = Vec::new();
        for seg in &sub {
            let (kind, level, speedup) = match seg.kind {
                SegmentKind::Semantic => (SegmentKind::Semantic, next_level, solution.semantic),
                SegmentKind::NonSemantic => {
                    (SegmentKind::Semantic, current_level, solution.non_semantic)
                }
            };
            // a concatenated run may span removed gaps; split at
            // discontinuities of the frame map
            let mut run_start = seg.start;
            for local in seg.start..seg.end {
                let next_breaks = local + 1 == seg.end
                    || frame_map[local + 1] != frame_map[local] + 1;
                if next_breaks {
                    replacement.push(Segment {
                        start: frame_map[run_start],
                        end: frame_map[local] + 1,
                        kind,
                        level,
                        speedup: Some(speedup),
                    });
                    run_start = local + 1;
                }
            }
        }
        let mut next_leaves: Vec<Segment> = leaves
            .iter()
            .filter(|s| s.level != current_level)
            .cloned()
            .collect();
        next_leaves.extend(replacement);
        next_leaves.sort_by_key(|s| s.start);
        leaves = next_leaves;

        tree.thresholds.push(threshold);
        tree.levels = (0..=next_level)
            .map(|lvl| {
                leaves
                    .iter()
                    .filter(|s| s.level == lvl)
                    .cloned()
                    .collect()
            })
            .collect();
        last_threshold = threshold;
        current_level = next_level;
        current_rate = solution.semantic;
        prev_shallow_rate = solution.non_semantic;
    }

    tree.leaves = leaves;
    debug_assert!(tree
        .leaves
        .windows(2)
        .all(|w| w[0].end == w[1].start));
    debug_assert_eq!(tree.leaves.first().map(|s| s.start), Some(0));
    debug_assert_eq!(tree.leaves.last().map(|s| s.end), Some(n));
    Ok(tree)
}
