//! Per-frame feature streams and semantic scoring.
//!
//! A stream arrives as JSON Lines: a header object carrying `version` and
//! `fps`, then one object per frame. Scores combine detector confidence,
//! region size and closeness to the frame center; an external per-frame
//! score, when present, wins over the computed one.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STREAM_VERSION: u32 = 1;

/// One detector hit: pixel bounding box, raw confidence and class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub class_label: String,
}

impl Detection {
    /// Bounding box clamped to the frame; `None` when nothing remains.
    pub fn clamped_bbox(&self, width: f64, height: f64) -> Option<[f64; 4]> {
        let [x, y, w, h] = self.bbox;
        let x0 = x.max(0.0);
        let y0 = y.max(0.0);
        let x1 = (x + w).min(width);
        let y1 = (y + h).min(height);
        if x1 > x0 && y1 > y0 {
            Some([x0, y0, x1 - x0, y1 - y0])
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub track_id: u64,
    pub x: f64,
    pub y: f64,
}

/// Everything the pipeline knows about one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub frame_index: usize,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
    pub keypoints: Vec<Keypoint>,
    /// Focus of expansion in pixels, when an estimate exists.
    pub foe: Option<[f64; 2]>,
    /// Mean optical-flow magnitude to the next frame, pixels/frame.
    pub flow_mean_magnitude: f64,
    /// Normalized appearance histogram (sums to 1).
    pub histogram: Vec<f64>,
    /// Path of the frame's grayscale raster, when rendered.
    pub raster: Option<String>,
    /// External per-frame semantic score overriding the computed one.
    pub score: Option<f64>,
}

impl FrameFeatures {
    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn half_diagonal(&self) -> f64 {
        ((self.width as f64).powi(2) + (self.height as f64).powi(2)).sqrt() / 2.0
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("frame dimensions must be positive".into());
        }
        let hist_sum: f64 = self.histogram.iter().sum();
        if self.histogram.iter().any(|&v| !(v >= 0.0)) {
            return Err("histogram entries must be non-negative".into());
        }
        if !self.histogram.is_empty() && (hist_sum - 1.0).abs() > 1e-9 {
            return Err(format!("histogram sums to {hist_sum}, expected 1"));
        }
        let mut seen = std::collections::HashSet::new();
        for kp in &self.keypoints {
            if !seen.insert(kp.track_id) {
                return Err(format!("duplicate track_id {}", kp.track_id));
            }
            if !kp.x.is_finite() || !kp.y.is_finite() {
                return Err(format!("non-finite keypoint on track {}", kp.track_id));
            }
        }
        if let Some([x, y]) = self.foe {
            if !x.is_finite() || !y.is_finite() {
                return Err("non-finite focus of expansion".into());
            }
        }
        for d in &self.detections {
            if !d.confidence.is_finite() {
                return Err(format!("non-finite confidence for class {}", d.class_label));
            }
            if d.bbox[2] <= 0.0 || d.bbox[3] <= 0.0 {
                return Err(format!("empty bounding box for class {}", d.class_label));
            }
            if d.clamped_bbox(self.width as f64, self.height as f64).is_none() {
                return Err(format!(
                    "detection of class {} lies outside the frame",
                    d.class_label
                ));
            }
        }
        if !self.flow_mean_magnitude.is_finite() || self.flow_mean_magnitude < 0.0 {
            return Err("flow magnitude must be finite and non-negative".into());
        }
        if let Some(s) = self.score {
            if !s.is_finite() {
                return Err("external score must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamHeader {
    version: u32,
    fps: f64,
}

/// An ordered, gapless run of frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStream {
    fps: f64,
    frames: Vec<FrameFeatures>,
}

impl FeatureStream {
    pub fn new(fps: f64, frames: Vec<FrameFeatures>) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::InvalidArgument("fps must be positive".into()));
        }
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(
                "a stream needs at least two frames".into(),
            ));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.frame_index != i {
                return Err(Error::InvalidArgument(format!(
                    "frame_index {} at position {i} breaks the gapless ordering",
                    f.frame_index
                )));
            }
            f.validate()
                .map_err(|m| Error::InvalidArgument(format!("frame {i}: {m}")))?;
        }
        Ok(FeatureStream { fps, frames })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameFeatures] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &FrameFeatures {
        &self.frames[index]
    }

    /// Mean of the per-frame flow magnitudes over the whole video.
    pub fn mean_flow_magnitude(&self) -> f64 {
        self.frames
            .iter()
            .map(|f| f.flow_mean_magnitude)
            .sum::<f64>()
            / self.frames.len() as f64
    }

    /// JSON-Lines load; errors carry the 1-based offending line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let display = path.display().to_string();
        let fmt = |line: usize, message: String| Error::Format {
            path: display.clone(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines
            .next()
            .ok_or_else(|| fmt(1, "empty stream file".into()))?;
        let header: StreamHeader = serde_json::from_str(header_line)
            .map_err(|e| fmt(1, format!("bad stream header: {e}")))?;
        if header.version != STREAM_VERSION {
            return Err(fmt(
                1,
                format!(
                    "unsupported stream version {} (expected {STREAM_VERSION})",
                    header.version
                ),
            ));
        }
        if !(header.fps > 0.0) {
            return Err(fmt(1, "fps must be positive".into()));
        }
        let mut frames: Vec<FrameFeatures> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let frame: FrameFeatures = serde_json::from_str(line)
                .map_err(|e| fmt(line_no, format!("bad frame object: {e}")))?;
            let expected = frames.len();
            if frame.frame_index != expected {
                let what = if frame.frame_index > expected {
                    "gap"
                } else {
                    "duplicate or out-of-order index"
                };
                return Err(fmt(
                    line_no,
                    format!(
                        "{what}: frame_index {} where {expected} was expected",
                        frame.frame_index
                    ),
                ));
            }
            frame
                .validate()
                .map_err(|m| fmt(line_no, m))?;
            frames.push(frame);
        }
        if frames.len() < 2 {
            return Err(fmt(1, "a stream needs at least two frames".into()));
        }
        Ok(FeatureStream {
            fps: header.fps,
            frames,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let header = StreamHeader {
            version: STREAM_VERSION,
            fps: self.fps,
        };
        let jerr = |e: serde_json::Error| Error::Json {
            path: path.display().to_string(),
            source: e,
        };
        writeln!(w, "{}", serde_json::to_string(&header).map_err(jerr)?)?;
        for frame in &self.frames {
            writeln!(w, "{}", serde_json::to_string(frame).map_err(jerr)?)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-frame semantic scores: the external score verbatim when present,
    /// otherwise the computed detector score.
    pub fn semantic_scores(&self, config: &ScoreConfig) -> Result<Vec<f64>> {
        let resolved = config.resolve(self)?;
        self.frames
            .iter()
            .map(|f| semantic_score(f, &resolved))
            .collect()
    }
}

/// Per-class confidence handling for the detector score.
///
/// Classes missing a normalization constant get the maximum confidence
/// observed for that class in the stream, so the best detection of a class
/// normalizes to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Minimum raw confidence per class; weaker detections are ignored.
    pub confidence_floor: HashMap<String, f64>,
    /// Raw-confidence divisor per class; missing entries are derived.
    pub confidence_norm: HashMap<String, f64>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        let mut floors = HashMap::new();
        floors.insert("face".to_string(), 60.0);
        floors.insert("pedestrian".to_string(), 100.0);
        ScoreConfig {
            confidence_floor: floors,
            confidence_norm: HashMap::new(),
        }
    }
}

impl ScoreConfig {
    pub fn resolve(&self, stream: &FeatureStream) -> Result<ResolvedScoreConfig> {
        let mut norms = self.confidence_norm.clone();
        for frame in stream.frames() {
            for det in &frame.detections {
                if !self.confidence_floor.contains_key(&det.class_label) {
                    return Err(Error::Config(format!(
                        "no confidence floor configured for class '{}' (frame {})",
                        det.class_label, frame.frame_index
                    )));
                }
                let entry = norms.entry(det.class_label.clone()).or_insert(0.0);
                if !self.confidence_norm.contains_key(&det.class_label) {
                    *entry = entry.max(det.confidence);
                }
            }
        }
        for (class, norm) in &norms {
            if !(*norm > 0.0) && self.confidence_norm.contains_key(class) {
                return Err(Error::Config(format!(
                    "normalization constant for class '{class}' must be positive"
                )));
            }
        }
        Ok(ResolvedScoreConfig {
            floors: self.confidence_floor.clone(),
            norms,
        })
    }
}

/// A [`ScoreConfig`] with every normalization constant pinned.
#[derive(Debug, Clone)]
pub struct ResolvedScoreConfig {
    floors: HashMap<String, f64>,
    norms: HashMap<String, f64>,
}

/// Gaussian centrality weight: 1 at the frame center, falling off with
/// sigma = min(W/2, H/2). Unnormalized, so a centered full-frame region
/// scores exactly 1.
pub fn gaussian_centrality(point: Point2<f64>, width: f64, height: f64) -> Result<f64> {
    if !point.x.is_finite() || !point.y.is_finite() {
        return Err(Error::InvalidArgument(
            "centrality point must be finite".into(),
        ));
    }
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::InvalidArgument(
            "frame dimensions must be positive".into(),
        ));
    }
    let sigma = (width / 2.0).min(height / 2.0);
    let dx = point.x - width / 2.0;
    let dy = point.y - height / 2.0;
    Ok((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp())
}

/// Detector-based semantic score of one frame: over detections at or above
/// their class floor, sum confidence x area-fraction x centrality. An
/// external score short-circuits the sum.
pub fn semantic_score(frame: &FrameFeatures, config: &ResolvedScoreConfig) -> Result<f64> {
    if let Some(s) = frame.score {
        return Ok(s);
    }
    let (w, h) = (frame.width as f64, frame.height as f64);
    let mut total = 0.0;
    for det in &frame.detections {
        let floor = config.floors.get(&det.class_label).ok_or_else(|| {
            Error::Config(format!(
                "no confidence floor configured for class '{}'",
                det.class_label
            ))
        })?;
        if det.confidence < *floor {
            continue;
        }
        let norm = config
            .norms
            .get(&det.class_label)
            .copied()
            .filter(|n| *n > 0.0)
            .unwrap_or(det.confidence.max(1e-12));
        let Some([x, y, bw, bh]) = det.clamped_bbox(w, h) else {
            continue;
        };
        let confidence = (det.confidence / norm).clamp(0.0, 1.0);
        let area = (bw * bh) / (w * h);
        let center = Point2::new(x + bw / 2.0, y + bh / 2.0);
        total += confidence * area * gaussian_centrality(center, w, h)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frame(index: usize, detections: Vec<Detection>) -> FrameFeatures {
        FrameFeatures {
            frame_index: index,
            width: 100,
            height: 100,
            detections,
            keypoints: vec![],
            foe: None,
            flow_mean_magnitude: 0.0,
            histogram: vec![0.5, 0.5],
            raster: None,
            score: None,
        }
    }

    fn det(bbox: [f64; 4], confidence: f64) -> Detection {
        Detection {
            bbox,
            confidence,
            class_label: "face".into(),
        }
    }

    fn two_frame_stream(first: FrameFeatures) -> FeatureStream {
        FeatureStream::new(30.0, vec![first, frame(1, vec![])]).unwrap()
    }

    #[test]
    fn centrality_peaks_at_center() {
        let g = gaussian_centrality(Point2::new(50.0, 50.0), 100.0, 100.0).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn centrality_one_sigma_and_corner() {
        // sigma = 50 for a 100x100 frame; independent evaluation of the Gaussian.
        let one_sigma = gaussian_centrality(Point2::new(100.0, 50.0), 100.0, 100.0).unwrap();
        assert_relative_eq!(one_sigma, (-0.5f64).exp(), epsilon = 1e-12);
        let corner = gaussian_centrality(Point2::new(0.0, 0.0), 100.0, 100.0).unwrap();
        assert_relative_eq!(corner, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn centrality_radially_symmetric() {
        let r = 17.3;
        let w = 321.0;
        let h = 200.0;
        let center = Point2::new(w / 2.0, h / 2.0);
        let mut values = vec![];
        for k in 0..12 {
            let ang = k as f64 * std::f64::consts::TAU / 12.0;
            let p = Point2::new(center.x + r * ang.cos(), center.y + r * ang.sin());
            values.push(gaussian_centrality(p, w, h).unwrap());
        }
        for v in &values[1..] {
            assert_relative_eq!(*v, values[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn centrality_rejects_non_finite() {
        assert!(gaussian_centrality(Point2::new(f64::NAN, 0.0), 10.0, 10.0).is_err());
    }

    #[test]
    fn score_empty_frame_is_zero() {
        let stream = two_frame_stream(frame(0, vec![]));
        let cfg = ScoreConfig::default().resolve(&stream).unwrap();
        assert_eq!(semantic_score(stream.frame(0), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn score_full_frame_centered_detection_is_one() {
        let stream = two_frame_stream(frame(0, vec![det([0.0, 0.0, 100.0, 100.0], 120.0)]));
        let cfg = ScoreConfig::default().resolve(&stream).unwrap();
        // norm derives to 120 so confidence becomes 1; area 1; centered.
        assert_relative_eq!(
            semantic_score(stream.frame(0), &cfg).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn score_two_detections_hand_computed() {
        // 300x100 frame, sigma = min(150, 50) = 50. One centered detection
        // with c=0.5 a=0.1 and one at (200, 50), one sigma off center, with
        // c=1.0 a=0.2. Hand evaluation: 0.05 + 0.2 * exp(-1/2).
        let (w, h) = (300.0, 100.0);
        let side_a = (0.1f64 * w * h).sqrt();
        let side_b = (0.2f64 * w * h).sqrt();
        let f = FrameFeatures {
            frame_index: 0,
            width: 300,
            height: 100,
            detections: vec![
                Detection {
                    bbox: [150.0 - side_a / 2.0, 50.0 - side_a / 2.0, side_a, side_a],
                    confidence: 100.0,
                    class_label: "face".into(),
                },
                Detection {
                    bbox: [200.0 - side_b / 2.0, 50.0 - side_b / 2.0, side_b, side_b],
                    confidence: 200.0,
                    class_label: "face".into(),
                },
            ],
            keypoints: vec![],
            foe: None,
            flow_mean_magnitude: 0.0,
            histogram: vec![1.0],
            raster: None,
            score: None,
        };
        let mut f1 = frame(1, vec![]);
        f1.width = 300;
        f1.height = 100;
        let stream = FeatureStream::new(30.0, vec![f, f1]).unwrap();
        let mut cfg = ScoreConfig::default();
        cfg.confidence_norm.insert("face".into(), 200.0);
        let resolved = cfg.resolve(&stream).unwrap();
        let expected = 0.05 + 0.2 * (-0.5f64).exp();
        assert_relative_eq!(
            semantic_score(stream.frame(0), &resolved).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_relative_eq!(expected, 0.17131, epsilon = 1e-5);
    }

    #[test]
    fn score_additive_and_order_invariant() {
        let d1 = det([10.0, 10.0, 20.0, 20.0], 90.0);
        let d2 = det([40.0, 55.0, 30.0, 10.0], 110.0);
        let mut cfg = ScoreConfig::default();
        cfg.confidence_norm.insert("face".into(), 120.0);

        let stream_ab = two_frame_stream(frame(0, vec![d1.clone(), d2.clone()]));
        let stream_ba = two_frame_stream(frame(0, vec![d2.clone(), d1.clone()]));
        let stream_a = two_frame_stream(frame(0, vec![d1]));
        let stream_b = two_frame_stream(frame(0, vec![d2]));
        let r = cfg.resolve(&stream_ab).unwrap();
        let ab = semantic_score(stream_ab.frame(0), &r).unwrap();
        let ba = semantic_score(stream_ba.frame(0), &r).unwrap();
        let a = semantic_score(stream_a.frame(0), &r).unwrap();
        let b = semantic_score(stream_b.frame(0), &r).unwrap();
        assert_eq!(ab, ba);
        assert_relative_eq!(ab, a + b, epsilon = 1e-12);
    }

    #[test]
    fn score_scales_with_confidence_below_clamp() {
        let mut cfg = ScoreConfig::default();
        cfg.confidence_norm.insert("face".into(), 1000.0);
        cfg.confidence_floor.insert("face".into(), 0.0);
        let base = two_frame_stream(frame(0, vec![det([20.0, 20.0, 40.0, 40.0], 100.0)]));
        let scaled = two_frame_stream(frame(0, vec![det([20.0, 20.0, 40.0, 40.0], 250.0)]));
        let r = cfg.resolve(&base).unwrap();
        let s1 = semantic_score(base.frame(0), &r).unwrap();
        let s2 = semantic_score(scaled.frame(0), &r).unwrap();
        assert_relative_eq!(s2, s1 * 2.5, epsilon = 1e-12);
    }

    #[test]
    fn score_external_override_wins() {
        let mut f = frame(0, vec![det([0.0, 0.0, 100.0, 100.0], 120.0)]);
        f.score = Some(0.123);
        let stream = two_frame_stream(f);
        let cfg = ScoreConfig::default().resolve(&stream).unwrap();
        assert_eq!(semantic_score(stream.frame(0), &cfg).unwrap(), 0.123);
    }

    #[test]
    fn score_unknown_class_is_config_error() {
        let mut d = det([10.0, 10.0, 5.0, 5.0], 10.0);
        d.class_label = "bicycle".into();
        let stream = two_frame_stream(frame(0, vec![d]));
        assert!(matches!(
            ScoreConfig::default().resolve(&stream),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn score_below_floor_is_ignored() {
        let stream = two_frame_stream(frame(0, vec![det([0.0, 0.0, 100.0, 100.0], 59.0)]));
        let cfg = ScoreConfig::default().resolve(&stream).unwrap();
        assert_eq!(semantic_score(stream.frame(0), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn stream_roundtrip_is_identity() {
        let mut f0 = frame(0, vec![det([1.5, 2.25, 10.0, 12.0], 61.125)]);
        f0.keypoints = vec![Keypoint {
            track_id: 3,
            x: 4.5,
            y: 6.0625,
        }];
        f0.foe = Some([49.5, 51.25]);
        f0.flow_mean_magnitude = 0.375;
        f0.score = Some(0.1);
        let stream = FeatureStream::new(29.97, vec![f0, frame(1, vec![])]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        stream.save(&path).unwrap();
        let back = FeatureStream::load(&path).unwrap();
        assert_eq!(back, stream);
        // byte-exactness of a second save
        let bytes = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn stream_load_reports_gap_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.jsonl");
        let f0 = serde_json::to_string(&frame(0, vec![])).unwrap();
        let f2 = serde_json::to_string(&frame(2, vec![])).unwrap();
        std::fs::write(
            &path,
            format!("{{\"version\":1,\"fps\":30.0}}\n{f0}\n{f2}\n"),
        )
        .unwrap();
        match FeatureStream::load(&path) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("gap"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn stream_load_rejects_unnormalized_histogram() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hist.jsonl");
        let mut f0 = frame(0, vec![]);
        f0.histogram = vec![0.4, 0.5];
        let l0 = serde_json::to_string(&f0).unwrap();
        let l1 = serde_json::to_string(&frame(1, vec![])).unwrap();
        std::fs::write(
            &path,
            format!("{{\"version\":1,\"fps\":30.0}}\n{l0}\n{l1}\n"),
        )
        .unwrap();
        match FeatureStream::load(&path) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("histogram"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
