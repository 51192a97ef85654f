//! Fast-forward video stabilization: master frames per segment, fractional
//! homography interpolation toward them, and crop/drop reconstruction that
//! stitches or replaces frames whose warp leaves the crop area uncovered.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStream;
use crate::geometry::{
    coverage_fraction, derive_seed, ransac_homography, union_coverage, warped_frame_quad,
    Homography, Pt, RansacConfig, Rect,
};
use crate::raster::{read_pgm, write_pgm, Raster};

const FULL_COVERAGE: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilizerConfig {
    /// Segment size for master-frame selection (output frames).
    pub segment_size: usize,
    /// Drop-area side fraction (dp).
    pub drop_fraction: f64,
    /// Crop-area side fraction (cp); the output viewport.
    pub crop_fraction: f64,
    /// Additive offset in the replacement score, keeps zero-score frames
    /// selectable.
    pub eta: f64,
    /// Width of the coverage Gaussian in the replacement score.
    pub replacement_sigma: f64,
    pub ransac_iterations: usize,
    /// Inlier threshold in pixels.
    pub ransac_threshold: f64,
    pub seed: u64,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        StabilizerConfig {
            segment_size: 4,
            drop_fraction: 0.5,
            crop_fraction: 0.9,
            eta: 0.5,
            replacement_sigma: 10.0,
            ransac_iterations: 500,
            ransac_threshold: 3.0,
            seed: 0,
        }
    }
}

impl StabilizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_size < 2 {
            return Err(Error::InvalidArgument(
                "segment size must be at least 2".into(),
            ));
        }
        if !(self.drop_fraction > 0.0 && self.drop_fraction < self.crop_fraction)
            || !(self.crop_fraction < 1.0)
        {
            return Err(Error::InvalidArgument(
                "fractions must satisfy 0 < drop < crop < 1".into(),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if !(self.replacement_sigma > 0.0) {
            return Err(Error::InvalidArgument(
                "replacement sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    fn ransac(&self, a: usize, b: usize) -> RansacConfig {
        RansacConfig {
            iterations: self.ransac_iterations,
            inlier_threshold: self.ransac_threshold,
            seed: derive_seed(self.seed, a as u64, b as u64),
        }
    }
}

/// Point pairs shared between two frames, matched by track id (sorted for
/// determinism).
pub fn correspondences(stream: &FeatureStream, a: usize, b: usize) -> Result<Vec<(Pt, Pt)>> {
    let by_id: HashMap<u64, Pt> = stream
        .frame(b)
        .keypoints
        .iter()
        .map(|kp| (kp.track_id, Point2::new(kp.x, kp.y)))
        .collect();
    let mut shared: Vec<(u64, Pt, Pt)> = stream
        .frame(a)
        .keypoints
        .iter()
        .filter_map(|kp| {
            by_id
                .get(&kp.track_id)
                .map(|&q| (kp.track_id, Point2::new(kp.x, kp.y), q))
        })
        .collect();
    shared.sort_by_key(|(id, _, _)| *id);
    if shared.len() < 4 {
        return Err(Error::InsufficientCorrespondences {
            frame_a: a,
            frame_b: b,
            found: shared.len(),
        });
    }
    Ok(shared.into_iter().map(|(_, p, q)| (p, q)).collect())
}

/// Memoized pairwise RANSAC homographies over one stabilization run; the
/// reverse direction is served by inversion.
struct PairCache<'a> {
    stream: &'a FeatureStream,
    config: &'a StabilizerConfig,
    cache: HashMap<(usize, usize), Option<(Homography, usize)>>,
}

impl<'a> PairCache<'a> {
    fn new(stream: &'a FeatureStream, config: &'a StabilizerConfig) -> Self {
        PairCache {
            stream,
            config,
            cache: HashMap::new(),
        }
    }

    /// Homography taking frame `a` into frame `b`'s plane, with the inlier
    /// count. `None` when the pair cannot be registered.
    fn between(&mut self, a: usize, b: usize) -> Option<(Homography, usize)> {
        if a == b {
            return Some((Homography::identity(), self.stream.frame(a).keypoints.len()));
        }
        let key = (a.min(b), a.max(b));
        let entry = self.cache.entry(key).or_insert_with(|| {
            let pairs = correspondences(self.stream, key.0, key.1).ok()?;
            let (h, inliers) = ransac_homography(&pairs, &self.config.ransac(key.0, key.1)).ok()?;
            Some((h, inliers.len()))
        });
        entry.as_ref().map(|(h, count)| {
            if a == key.0 {
                (h.clone(), *count)
            } else {
                (h.inverse(), *count)
            }
        })
    }

    fn inliers(&mut self, a: usize, b: usize) -> usize {
        self.between(a, b).map_or(0, |(_, count)| count)
    }
}

/// Picks the frame with the largest summed inlier count to its peers;
/// ties prefer the frame closest to the segment center, then the lower
/// index. `None` when no frame registers against any other.
pub fn select_master(
    stream: &FeatureStream,
    frames: &[usize],
    config: &StabilizerConfig,
) -> Result<Option<usize>> {
    config.validate()?;
    let mut cache = PairCache::new(stream, config);
    Ok(select_master_cached(frames, &mut cache))
}

fn select_master_cached(frames: &[usize], cache: &mut PairCache<'_>) -> Option<usize> {
    if frames.is_empty() {
        return None;
    }
    if frames.len() == 1 {
        return Some(frames[0]);
    }
    let center = (frames.len() - 1) as f64 / 2.0;
    let mut best: Option<(usize, f64, usize)> = None; // (sum, center distance, frame)
    for (pos, &candidate) in frames.iter().enumerate() {
        let sum: usize = frames
            .iter()
            .filter(|&&other| other != candidate)
            .map(|&other| cache.inliers(candidate, other))
            .sum();
        let dist = (pos as f64 - center).abs();
        let better = match best {
            None => true,
            Some((s, d, _)) => sum > s || (sum == s && dist < d),
        };
        if better {
            best = Some((sum, dist, candidate));
        }
    }
    match best {
        Some((0, _, _)) => None, // nothing registers against anything
        Some((_, _, frame)) => Some(frame),
        None => None,
    }
}

// --- Eq. 7 style replacement scoring --------------------------------------------

/// A dropped frame considered as a stand-in, with its precomputed terms.
#[derive(Debug, Clone, Copy)]
pub struct ReplacementCandidate {
    pub frame: usize,
    /// Crop coverage achieved by the candidate's interpolated warp.
    pub coverage: f64,
    /// Summed RANSAC inlier counts to the two neighboring output frames.
    pub inlier_sum: usize,
    /// Semantic score of the candidate.
    pub score: f64,
}

/// The replacement objective: a coverage Gaussian centered at full coverage,
/// times the inlier sum, times the eta-offset semantic score.
pub fn replacement_score(candidate: &ReplacementCandidate, eta: f64, sigma: f64) -> f64 {
    let g = (-(candidate.coverage - 1.0).powi(2) / (2.0 * sigma * sigma)).exp();
    g * candidate.inlier_sum as f64 * (eta + candidate.score)
}

/// Argmax of [`replacement_score`]; ties prefer the lower frame index.
/// `None` on an empty candidate set.
pub fn select_replacement_frame(
    candidates: &[ReplacementCandidate],
    eta: f64,
    sigma: f64,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for c in candidates {
        let s = replacement_score(c, eta, sigma);
        let better = match best {
            None => true,
            Some((bs, bf)) => s > bs || (s == bs && c.frame < bf),
        };
        if better {
            best = Some((s, c.frame));
        }
    }
    best.map(|(_, f)| f)
}

// --- the plan --------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchSupport {
    pub frame: usize,
    /// Warp taking the support frame onto the stabilized plane.
    pub homography: Homography,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PlanAction {
    /// The interpolated warp already covers the crop area.
    Kept,
    /// Coverage completed from dropped frames.
    Stitched { support: Vec<StitchSupport> },
    /// The frame was swapped for a dropped neighbor.
    Replaced { original: usize },
    /// No reconstruction possible; the frame leaves the output.
    Dropped { original: usize },
    /// Registration failed; the frame passes through unwarped.
    IdentityFallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntry {
    pub output_index: usize,
    pub source_frame: usize,
    pub homography: Homography,
    /// Fraction of the crop rectangle covered after reconstruction.
    pub coverage: f64,
    #[serde(flatten)]
    pub action: PlanAction,
    pub master_pre: usize,
    pub master_pos: usize,
    /// Frames from the previous master (original timeline).
    pub delta: f64,
    /// Frames between the bracketing masters.
    pub span: f64,
    /// The interpolation weight after clamping.
    pub weight: f64,
}

impl PlanEntry {
    pub fn emitted(&self) -> bool {
        !matches!(self.action, PlanAction::Dropped { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizationPlan {
    pub width: u32,
    pub height: u32,
    pub crop_fraction: f64,
    pub drop_fraction: f64,
    pub masters: Vec<usize>,
    pub entries: Vec<PlanEntry>,
    /// Segments (by chunk index) where no master could be registered.
    pub unstabilizable_segments: Vec<usize>,
}

impl StabilizationPlan {
    pub fn crop_rect(&self) -> Rect {
        Rect::centered(self.crop_fraction, self.width as f64, self.height as f64)
    }

    pub fn output_frames(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.emitted())
            .map(|e| e.source_frame)
            .collect()
    }
}

/// Runs the full stabilization pass over a frame selection.
///
/// `dropped` are the input frames left out by the sampling step; each may be
/// consumed at most once, either stitched into an output frame or promoted
/// to replace one. `scores` feeds the semantic factor of the replacement
/// objective.
pub fn stabilize(
    selection: &[usize],
    dropped: &[usize],
    stream: &FeatureStream,
    scores: &[f64],
    config: &StabilizerConfig,
) -> Result<StabilizationPlan> {
    config.validate()?;
    if selection.is_empty() {
        return Err(Error::InvalidArgument("empty selection".into()));
    }
    let first = stream.frame(0);
    let (w, h) = (first.width as f64, first.height as f64);
    let crop = Rect::centered(config.crop_fraction, w, h);
    let drop_rect = Rect::centered(config.drop_fraction, w, h);
    let alpha = config.segment_size;

    let mut cache = PairCache::new(stream, config);

    // masters per alpha-sized chunk of the selection
    let mut masters: Vec<(usize, usize)> = Vec::new(); // (selection position, frame)
    let mut unstabilizable_segments = Vec::new();
    for (chunk_idx, chunk) in selection.chunks(alpha).enumerate() {
        match select_master_cached(chunk, &mut cache) {
            Some(frame) => {
                let pos = selection.iter().position(|&f| f == frame).unwrap();
                masters.push((pos, frame));
            }
            None => unstabilizable_segments.push(chunk_idx),
        }
    }

    let mut used: Vec<bool> = vec![false; dropped.len()];
    let mut entries = Vec::with_capacity(selection.len());

    for (pos, &frame) in selection.iter().enumerate() {
        let Some((master_pre, master_pos)) = bracketing_masters(&masters, pos) else {
            // no master anywhere: identity pass-through
            entries.push(identity_entry(pos, frame));
            continue;
        };
        let interpolate = |cache: &mut PairCache<'_>, source: usize| -> Option<(Homography, f64, f64, f64)> {
            interpolated_warp(cache, source, master_pre, master_pos, alpha)
        };
        let Some((mut warp, mut delta, mut span, mut weight)) = interpolate(&mut cache, frame)
        else {
            entries.push(identity_entry(pos, frame));
            continue;
        };

        let mut source = frame;
        let mut action = PlanAction::Kept;
        let mut supports: Vec<StitchSupport> = Vec::new();
        let mut coverage = coverage_or_zero(&warp, w, h, &crop);
        let mut skipped: Vec<usize> = Vec::new();
        while coverage < FULL_COVERAGE {
            let covers_drop = coverage_or_zero(&warp, w, h, &drop_rect) >= FULL_COVERAGE;
            let stitch_candidate = covers_drop
                .then(|| nearest_unused(dropped, &used, &skipped, source))
                .flatten();
            if let Some(didx) = stitch_candidate {
                let d = dropped[didx];
                // warp the dropped frame through the current plane
                let Some((to_source, _)) = cache.between(d, source) else {
                    skipped.push(didx);
                    continue;
                };
                used[didx] = true;
                let support_warp = warp.compose(&to_source);
                supports.push(StitchSupport {
                    frame: d,
                    homography: support_warp,
                });
                coverage = stitched_coverage(&warp, &supports, w, h, &crop);
                action = PlanAction::Stitched {
                    support: supports.clone(),
                };
            } else {
                // Eq. 7 replacement from the dropped frames between the
                // neighboring output frames
                let lo = if pos > 0 { selection[pos - 1] } else { 0 };
                let hi = if pos + 1 < selection.len() {
                    selection[pos + 1]
                } else {
                    stream.len()
                };
                let mut candidates = Vec::new();
                let mut warps: HashMap<usize, (Homography, f64, f64, f64)> = HashMap::new();
                for (didx, &d) in dropped.iter().enumerate() {
                    if used[didx] || d <= lo || d >= hi || d == source {
                        continue;
                    }
                    let Some(parts) = interpolate(&mut cache, d) else {
                        continue;
                    };
                    let cov = coverage_or_zero(&parts.0, w, h, &crop);
                    let inlier_sum = neighbor_inliers(&mut cache, d, pos, selection);
                    candidates.push(ReplacementCandidate {
                        frame: d,
                        coverage: cov,
                        inlier_sum,
                        score: scores.get(d).copied().unwrap_or(0.0),
                    });
                    warps.insert(d, parts);
                }
                let Some(pick) =
                    select_replacement_frame(&candidates, config.eta, config.replacement_sigma)
                else {
                    action = PlanAction::Dropped { original: frame };
                    break;
                };
                let didx = dropped.iter().position(|&d| d == pick).unwrap();
                used[didx] = true;
                let (new_warp, new_delta, new_span, new_weight) = warps.remove(&pick).unwrap();
                warp = new_warp;
                (delta, span, weight) = (new_delta, new_span, new_weight);
                source = pick;
                supports.clear();
                coverage = coverage_or_zero(&warp, w, h, &crop);
                action = PlanAction::Replaced { original: frame };
            }
        }
        entries.push(PlanEntry {
            output_index: pos,
            source_frame: source,
            homography: warp,
            coverage,
            action,
            master_pre,
            master_pos,
            delta,
            span,
            weight,
        });
    }

    Ok(StabilizationPlan {
        width: first.width,
        height: first.height,
        crop_fraction: config.crop_fraction,
        drop_fraction: config.drop_fraction,
        masters: masters.iter().map(|&(_, f)| f).collect(),
        entries,
        unstabilizable_segments,
    })
}

fn identity_entry(pos: usize, frame: usize) -> PlanEntry {
    PlanEntry {
        output_index: pos,
        source_frame: frame,
        homography: Homography::identity(),
        coverage: 1.0,
        action: PlanAction::IdentityFallback,
        master_pre: frame,
        master_pos: frame,
        delta: 0.0,
        span: 0.0,
        weight: 0.0,
    }
}

/// Bracketing masters by selection position: the last master at or before
/// `pos` and the first after it, clamped to the ends.
fn bracketing_masters(masters: &[(usize, usize)], pos: usize) -> Option<(usize, usize)> {
    if masters.is_empty() {
        return None;
    }
    let pre = masters
        .iter()
        .rev()
        .find(|&&(p, _)| p <= pos)
        .unwrap_or(&masters[0])
        .1;
    let post = masters
        .iter()
        .find(|&&(p, _)| p > pos)
        .unwrap_or(masters.last().unwrap())
        .1;
    Some((pre, post))
}

/// The master-interpolated warp of `source`:
/// `H(source -> M_pre)^(1-w) . H(source -> M_pos)^w` with
/// `w = delta * 2 alpha / span` clamped to [0, 1]. Falls back to entrywise
/// interpolation when a principal power does not exist.
fn interpolated_warp(
    cache: &mut PairCache<'_>,
    source: usize,
    master_pre: usize,
    master_pos: usize,
    alpha: usize,
) -> Option<(Homography, f64, f64, f64)> {
    let delta = source.abs_diff(master_pre) as f64;
    let span = master_pos.abs_diff(master_pre) as f64;
    if master_pre == master_pos {
        let (h, _) = cache.between(source, master_pre)?;
        return Some((h, delta, span, 0.0));
    }
    let (h_pre, _) = cache.between(source, master_pre)?;
    let (h_pos, _) = cache.between(source, master_pos)?;
    let weight = (delta * 2.0 * alpha as f64 / span).clamp(0.0, 1.0);
    let part_pre = h_pre
        .fractional_power(1.0 - weight)
        .unwrap_or_else(|_| h_pre.lerp_identity(1.0 - weight));
    let part_pos = h_pos
        .fractional_power(weight)
        .unwrap_or_else(|_| h_pos.lerp_identity(weight));
    Some((part_pre.compose(&part_pos), delta, span, weight))
}

fn coverage_or_zero(h: &Homography, w: f64, hgt: f64, rect: &Rect) -> f64 {
    coverage_fraction(h, w, hgt, rect).unwrap_or(0.0)
}

fn stitched_coverage(
    warp: &Homography,
    supports: &[StitchSupport],
    w: f64,
    h: f64,
    crop: &Rect,
) -> f64 {
    let mut quads = Vec::with_capacity(supports.len() + 1);
    if let Ok(q) = warped_frame_quad(warp, w, h) {
        quads.push(q);
    }
    for s in supports {
        if let Ok(q) = warped_frame_quad(&s.homography, w, h) {
            quads.push(q);
        }
    }
    union_coverage(&quads, crop)
}

/// Nearest-in-time unused dropped frame, earlier on ties.
fn nearest_unused(
    dropped: &[usize],
    used: &[bool],
    skipped: &[usize],
    reference: usize,
) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None; // (distance, index)
    for (idx, &d) in dropped.iter().enumerate() {
        if used[idx] || skipped.contains(&idx) {
            continue;
        }
        let dist = d.abs_diff(reference);
        let better = match best {
            None => true,
            Some((bd, bidx)) => dist < bd || (dist == bd && dropped[idx] < dropped[bidx]),
        };
        if better {
            best = Some((dist, idx));
        }
    }
    best.map(|(_, idx)| idx)
}

fn neighbor_inliers(
    cache: &mut PairCache<'_>,
    candidate: usize,
    pos: usize,
    selection: &[usize],
) -> usize {
    let mut sum = 0;
    if pos > 0 {
        sum += cache.inliers(candidate, selection[pos - 1]);
    }
    if pos + 1 < selection.len() {
        sum += cache.inliers(candidate, selection[pos + 1]);
    }
    sum
}

// --- rendering --------------------------------------------------------------------

/// Applies the plan to rendered rasters: warp, composite stitches, crop.
/// Returns the stabilized frames in output order.
pub fn render_plan(plan: &StabilizationPlan, stream: &FeatureStream) -> Result<Vec<Raster>> {
    let crop = plan.crop_rect();
    let mut out = Vec::new();
    for entry in &plan.entries {
        if !entry.emitted() {
            continue;
        }
        let base = load_raster(stream, entry.source_frame)?;
        let mut pixels = base.warp_nearest(&entry.homography);
        if let PlanAction::Stitched { support } = &entry.action {
            for s in support {
                let raster = load_raster(stream, s.frame)?;
                let warped = raster.warp_nearest(&s.homography);
                for (dst, src) in pixels.iter_mut().zip(warped) {
                    if dst.is_none() {
                        *dst = src;
                    }
                }
            }
        }
        let full = Raster::new(
            base.width,
            base.height,
            pixels.into_iter().map(|p| p.unwrap_or(0)).collect(),
        )?;
        out.push(full.crop(&crop));
    }
    Ok(out)
}

/// The unstabilized reference: the selected frames cropped to the same
/// viewport, no warping.
pub fn crop_selection(
    stream: &FeatureStream,
    selection: &[usize],
    crop_fraction: f64,
) -> Result<Vec<Raster>> {
    let first = stream.frame(0);
    let crop = Rect::centered(crop_fraction, first.width as f64, first.height as f64);
    selection
        .iter()
        .map(|&f| Ok(load_raster(stream, f)?.crop(&crop)))
        .collect()
}

fn load_raster(stream: &FeatureStream, frame: usize) -> Result<Raster> {
    let path = stream.frame(frame).raster.as_ref().ok_or(Error::MissingFeature {
        frame,
        feature: "raster",
    })?;
    read_pgm(Path::new(path))
}

/// Writes rendered rasters as `out_NNNNNN.pgm` under `dir`.
pub fn write_rasters(rasters: &[Raster], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(rasters.len());
    for (i, raster) in rasters.iter().enumerate() {
        let path = dir.join(format!("out_{i:06}.pgm"));
        write_pgm(&path, raster)?;
        paths.push(path);
    }
    Ok(paths)
}
