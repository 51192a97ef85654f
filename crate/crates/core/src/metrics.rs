//! Quantitative evaluation: the instability index over sliding buffers,
//! semantic retention against the top-ranked frames, and the achieved
//! speed-up ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pso::top_n_score_sum;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InstabilityConfig {
    /// Frames per sliding buffer.
    pub buffer: usize,
    pub stride: usize,
}

impl InstabilityConfig {
    /// Half a second of output frames per buffer, stride 1.
    pub fn for_fps(fps: f64) -> Self {
        InstabilityConfig {
            buffer: (fps / 2.0).ceil().max(2.0) as usize,
            stride: 1,
        }
    }
}

/// Mean over sliding buffers of the per-pixel temporal sample standard
/// deviation, averaged over pixels. Lower is smoother.
pub fn instability_index(frames: &[Raster], config: &InstabilityConfig) -> Result<f64> {
    if config.buffer < 2 {
        return Err(Error::InvalidArgument(
            "buffer must span at least two frames".into(),
        ));
    }
    if config.stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if frames.len() < config.buffer {
        return Err(Error::InvalidArgument(format!(
            "need at least {} frames, got {}",
            config.buffer,
            frames.len()
        )));
    }
    let (w, h) = (frames[0].width, frames[0].height);
    for (i, f) in frames.iter().enumerate() {
        if f.width != w || f.height != h {
            return Err(Error::InvalidArgument(format!(
                "frame {i} is {}x{}, expected {w}x{h}",
                f.width, f.height
            )));
        }
    }
    let pixels = (w as usize) * (h as usize);
    let nb = config.buffer as f64;
    let mut std_sum = vec![0.0f64; pixels];
    let mut buffers = 0usize;
    let mut start = 0usize;
    while start + config.buffer <= frames.len() {
        for p in 0..pixels {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for f in &frames[start..start + config.buffer] {
                let v = f.pixels[p] as f64;
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / nb;
            let var = ((sum_sq - nb * mean * mean) / (nb - 1.0)).max(0.0);
            std_sum[p] += var.sqrt();
        }
        buffers += 1;
        start += config.stride;
    }
    let mean_over_buffers = std_sum.iter().map(|s| s / buffers as f64).sum::<f64>();
    Ok(mean_over_buffers / pixels as f64)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Retention {
    pub fraction: f64,
    /// Set when the stream carries no semantic content at all (the fraction
    /// is then 1 by definition).
    pub degenerate: bool,
}

/// Fraction of the maximum attainable semantic content kept by a selection:
/// sum over selected frames divided by the sum of the top `ceil(L / F_d)`
/// scores.
pub fn semantic_retention(selection: &[usize], scores: &[f64], required: f64) -> Result<Retention> {
    if !(required >= 1.0) {
        return Err(Error::InvalidArgument(
            "required speed-up must be at least 1".into(),
        ));
    }
    let n = (scores.len() as f64 / required).ceil() as usize;
    let max = top_n_score_sum(scores, n);
    if max <= 0.0 {
        return Ok(Retention {
            fraction: 1.0,
            degenerate: true,
        });
    }
    let kept: f64 = selection.iter().map(|&f| scores[f]).sum();
    Ok(Retention {
        fraction: (kept / max).min(1.0),
        degenerate: false,
    })
}

/// Input length over output length.
pub fn achieved_speedup(input_len: usize, output_len: usize) -> Result<f64> {
    if output_len == 0 {
        return Err(Error::InvalidArgument("empty output video".into()));
    }
    Ok(input_len as f64 / output_len as f64)
}
