//! Seeded synthetic scenarios: feature streams with known camera motion,
//! scripted semantic blocks and optional rendered rasters, plus the ground
//! truth that generated them.

use std::path::PathBuf;

use nalgebra::{Matrix3, Point2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Detection, FeatureStream, FrameFeatures, Keypoint};
use crate::geometry::Homography;
use crate::graph::foe_or_fallback;
use crate::raster::{write_pgm, Raster};

/// A run of frames carrying semantic content at some intensity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticBlock {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    /// 1 = mild, larger = stronger; scales detection confidence and size.
    pub intensity: u32,
}

/// One inter-frame camera motion: zoom and rotation about the frame center
/// plus a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionStep {
    pub dx: f64,
    pub dy: f64,
    /// Radians.
    pub rot: f64,
    pub zoom: f64,
}

impl MotionStep {
    pub const IDENTITY: MotionStep = MotionStep {
        dx: 0.0,
        dy: 0.0,
        rot: 0.0,
        zoom: 1.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionScript {
    /// No camera motion (jitter still applies when configured).
    Identity,
    /// Constant forward motion: slight zoom-in each frame plus a drift.
    Forward {
        zoom: f64,
        #[serde(default)]
        drift_x: f64,
        #[serde(default)]
        drift_y: f64,
    },
    /// Explicit per-transition steps; must hold `length - 1` entries.
    Scripted { steps: Vec<MotionStep> },
}

impl Default for MotionScript {
    fn default() -> Self {
        MotionScript::Identity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    /// Per-frame random camera translation, pixels (sigma).
    #[serde(default)]
    pub motion_jitter: f64,
    /// Keypoint measurement noise, pixels (sigma).
    #[serde(default)]
    pub keypoint_jitter: f64,
    /// Detector confidence noise (sigma).
    #[serde(default)]
    pub confidence_jitter: f64,
    /// Additive raster noise, gray levels (sigma).
    #[serde(default)]
    pub raster_noise: f64,
}

fn default_width() -> u32 {
    640
}
fn default_height() -> u32 {
    480
}
fn default_tracks() -> usize {
    40
}
fn default_bins() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub length: usize,
    pub fps: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default)]
    pub semantic_blocks: Vec<SemanticBlock>,
    #[serde(default)]
    pub camera_motion: MotionScript,
    #[serde(default)]
    pub noise: NoiseLevels,
    pub seed: u64,
    #[serde(default = "default_tracks")]
    pub track_count: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// When set, grayscale PGM rasters are rendered here and referenced from
    /// the stream.
    #[serde(default)]
    pub raster_dir: Option<PathBuf>,
}

impl ScenarioSpec {
    /// A minimal scenario with library defaults.
    pub fn base(length: usize, fps: f64, seed: u64) -> Self {
        ScenarioSpec {
            length,
            fps,
            width: default_width(),
            height: default_height(),
            semantic_blocks: Vec::new(),
            camera_motion: MotionScript::Identity,
            noise: NoiseLevels::default(),
            seed,
            track_count: default_tracks(),
            histogram_bins: default_bins(),
            raster_dir: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidArgument(
                "scenario needs at least two frames".into(),
            ));
        }
        if !(self.fps > 0.0) {
            return Err(Error::InvalidArgument("fps must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "frame dimensions must be positive".into(),
            ));
        }
        if self.histogram_bins < 2 {
            return Err(Error::InvalidArgument(
                "histogram needs at least two bins".into(),
            ));
        }
        let mut sorted = self.semantic_blocks.clone();
        sorted.sort_by_key(|b| b.start);
        for b in &sorted {
            if b.start >= b.end || b.end > self.length {
                return Err(Error::InvalidArgument(format!(
                    "block [{}, {}) lies outside the video",
                    b.start, b.end
                )));
            }
            if b.intensity == 0 {
                return Err(Error::InvalidArgument(
                    "block intensity must be at least 1".into(),
                ));
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::InvalidArgument(format!(
                    "blocks [{}, {}) and [{}, {}) overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        if let MotionScript::Scripted { steps } = &self.camera_motion {
            if steps.len() != self.length - 1 {
                return Err(Error::InvalidArgument(format!(
                    "scripted motion holds {} steps, expected {}",
                    steps.len(),
                    self.length - 1
                )));
            }
        }
        Ok(())
    }
}

/// What actually generated the stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `step_homographies[k]` maps frame `k` coordinates into frame `k + 1`.
    pub step_homographies: Vec<Homography>,
    /// Semantic intensity per frame; 0 outside every block.
    pub frame_levels: Vec<u32>,
    pub blocks: Vec<SemanticBlock>,
}

impl GroundTruth {
    /// Cumulative homography taking frame `a` coordinates into frame `b`,
    /// `a <= b`.
    pub fn homography_between(&self, a: usize, b: usize) -> Homography {
        let mut h = Homography::identity();
        for step in &self.step_homographies[a..b] {
            h = step.compose(&h);
        }
        h
    }
}

fn step_matrix(step: &MotionStep, cx: f64, cy: f64) -> Matrix3<f64> {
    // zoom * rotation about the frame center, then translate
    let (s, c) = (step.rot.sin(), step.rot.cos());
    let (m00, m01) = (step.zoom * c, -step.zoom * s);
    let (m10, m11) = (step.zoom * s, step.zoom * c);
    let tx = cx - (m00 * cx + m01 * cy) + step.dx;
    let ty = cy - (m10 * cx + m11 * cy) + step.dy;
    Matrix3::new(m00, m01, tx, m10, m11, ty, 0.0, 0.0, 1.0)
}

fn world_gray(x: f64, y: f64) -> f64 {
    let smooth = 105.0 + 55.0 * (x * 0.045).sin() + 45.0 * (y * 0.06).cos();
    let block = if ((x / 28.0).floor() + (y / 28.0).floor()).rem_euclid(2.0) < 1.0 {
        45.0
    } else {
        0.0
    };
    smooth + block
}

/// Generates the stream and its ground truth, deterministically per seed.
/// Rendered rasters (when `raster_dir` is set) are written as PGM files.
pub fn synthesize_scenario(spec: &ScenarioSpec) -> Result<(FeatureStream, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let length = spec.length;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);

    // 1. motion steps (base script plus jitter translation)
    let mut steps = Vec::with_capacity(length - 1);
    for k in 0..length - 1 {
        let base = match &spec.camera_motion {
            MotionScript::Identity => MotionStep::IDENTITY,
            MotionScript::Forward {
                zoom,
                drift_x,
                drift_y,
            } => MotionStep {
                dx: *drift_x,
                dy: *drift_y,
                rot: 0.0,
                zoom: *zoom,
            },
            MotionScript::Scripted { steps } => steps[k],
        };
        let (jx, jy) = (
            normal(&mut rng) * spec.noise.motion_jitter,
            normal(&mut rng) * spec.noise.motion_jitter,
        );
        let jittered = MotionStep {
            dx: base.dx + jx,
            dy: base.dy + jy,
            ..base
        };
        steps.push(Homography::from_matrix(step_matrix(&jittered, cx, cy))?);
    }

    // 2. keypoint tracks advected by the steps
    let mut next_track_id = 0u64;
    let mut active: Vec<(u64, Point2<f64>)> = Vec::new();
    let mut spawn = |rng: &mut ChaCha8Rng, active: &mut Vec<(u64, Point2<f64>)>| {
        while active.len() < spec.track_count {
            let p = Point2::new(
                rng.random_range(0.05 * w..0.95 * w),
                rng.random_range(0.05 * h..0.95 * h),
            );
            active.push((next_track_id, p));
            next_track_id += 1;
        }
    };
    spawn(&mut rng, &mut active);
    let mut keypoints_per_frame: Vec<Vec<Keypoint>> = Vec::with_capacity(length);
    keypoints_per_frame.push(
        active
            .iter()
            .map(|(id, p)| Keypoint {
                track_id: *id,
                x: p.x,
                y: p.y,
            })
            .collect(),
    );
    for step in &steps {
        let mut survivors = Vec::with_capacity(active.len());
        for (id, p) in &active {
            let mut q = step.apply(*p);
            if spec.noise.keypoint_jitter > 0.0 {
                q.x += normal(&mut rng) * spec.noise.keypoint_jitter;
                q.y += normal(&mut rng) * spec.noise.keypoint_jitter;
            }
            if q.x >= 0.0 && q.x < w && q.y >= 0.0 && q.y < h {
                survivors.push((*id, q));
            }
        }
        active = survivors;
        spawn(&mut rng, &mut active);
        keypoints_per_frame.push(
            active
                .iter()
                .map(|(id, p)| Keypoint {
                    track_id: *id,
                    x: p.x,
                    y: p.y,
                })
                .collect(),
        );
    }

    // 3. flow summaries and FOE from an analytic probe grid
    let mut foes = Vec::with_capacity(length);
    let mut flow_mags = Vec::with_capacity(length);
    for step in &steps {
        let mut probes = Vec::with_capacity(25);
        for gy in 0..5 {
            for gx in 0..5 {
                let p = Point2::new(w * (0.1 + 0.2 * gx as f64), h * (0.1 + 0.2 * gy as f64));
                let d: Vector2<f64> = step.apply(p) - p;
                probes.push((p, d));
            }
        }
        let mean_mag = probes.iter().map(|(_, d)| d.norm()).sum::<f64>() / probes.len() as f64;
        foes.push(foe_or_fallback(&probes, w, h));
        flow_mags.push(mean_mag);
    }
    // the last frame has no outgoing transition
    foes.push(*foes.last().unwrap_or(&Point2::new(cx, cy)));
    flow_mags.push(0.0);

    // 4. per-frame semantic level and detections
    let mut frame_levels = vec![0u32; length];
    for block in &spec.semantic_blocks {
        for lvl in &mut frame_levels[block.start..block.end] {
            *lvl = block.intensity;
        }
    }
    let mut detections_per_frame: Vec<Vec<Detection>> = Vec::with_capacity(length);
    for &level in &frame_levels {
        if level == 0 {
            detections_per_frame.push(vec![]);
            continue;
        }
        let area_fraction = (0.08 + 0.06 * f64::from(level)).min(0.5);
        let side = (area_fraction * w * h).sqrt();
        let wiggle = 2.0;
        let center_x = (cx + normal(&mut rng) * wiggle).clamp(side / 2.0, w - side / 2.0);
        let center_y = (cy + normal(&mut rng) * wiggle).clamp(side / 2.0, h - side / 2.0);
        let confidence =
            (70.0 + 25.0 * f64::from(level) + normal(&mut rng) * spec.noise.confidence_jitter)
                .max(0.0);
        detections_per_frame.push(vec![Detection {
            bbox: [center_x - side / 2.0, center_y - side / 2.0, side, side],
            confidence,
            class_label: "face".into(),
        }]);
    }

    // 5. appearance histograms drifting with accumulated motion
    let bins = spec.histogram_bins;
    let mut drift = 0.0;
    let mut histograms = Vec::with_capacity(length);
    for k in 0..length {
        if k > 0 {
            let m = steps[k - 1].matrix();
            drift += (m[(0, 2)].powi(2) + m[(1, 2)].powi(2)).sqrt();
        }
        let mu = bins as f64 * (0.5 + 0.35 * (0.003 * k as f64 + 0.02 * drift).sin());
        let sigma = bins as f64 / 8.0;
        let mut hist: Vec<f64> = (0..bins)
            .map(|b| (-((b as f64 - mu).powi(2)) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = hist.iter().sum();
        for v in &mut hist {
            *v /= sum;
        }
        histograms.push(hist);
    }

    // 6. optional rendered rasters: world texture warped by the cumulative
    // motion plus additive noise
    let mut raster_paths: Vec<Option<String>> = vec![None; length];
    if let Some(dir) = &spec.raster_dir {
        std::fs::create_dir_all(dir)?;
        let mut cumulative = Homography::identity();
        for k in 0..length {
            if k > 0 {
                cumulative = steps[k - 1].compose(&cumulative);
            }
            let inv = cumulative.inverse();
            let mut pixels = Vec::with_capacity((spec.width as usize) * (spec.height as usize));
            for py in 0..spec.height {
                for px in 0..spec.width {
                    let src = inv.apply(Point2::new(px as f64, py as f64));
                    let mut v = world_gray(src.x, src.y);
                    if spec.noise.raster_noise > 0.0 {
                        v += normal(&mut rng) * spec.noise.raster_noise;
                    }
                    pixels.push(v.clamp(0.0, 255.0).round() as u8);
                }
            }
            let raster = Raster::new(spec.width, spec.height, pixels)?;
            let path = dir.join(format!("frame_{k:06}.pgm"));
            write_pgm(&path, &raster)?;
            raster_paths[k] = Some(path.to_string_lossy().into_owned());
        }
    }

    let frames: Vec<FrameFeatures> = (0..length)
        .map(|k| FrameFeatures {
            frame_index: k,
            width: spec.width,
            height: spec.height,
            detections: detections_per_frame[k].clone(),
            keypoints: keypoints_per_frame[k].clone(),
            foe: Some([foes[k].x, foes[k].y]),
            flow_mean_magnitude: flow_mags[k],
            histogram: histograms[k].clone(),
            raster: raster_paths[k].clone(),
            score: None,
        })
        .collect();
    let stream = FeatureStream::new(spec.fps, frames)?;
    let truth = GroundTruth {
        step_homographies: steps,
        frame_levels,
        blocks: spec.semantic_blocks.clone(),
    };
    Ok((stream, truth))
}
