//! The constrained two-rate assignment: pick integer speed-ups for the
//! semantic and non-semantic parts so the whole video still hits the
//! required rate, solved by exhaustive search over the integer box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedupProblem {
    pub semantic_frames: usize,
    pub non_semantic_frames: usize,
    /// The user-required overall rate, at least 1.
    pub required: f64,
    /// Weight on |F_ns - F_s| (keep the rates close).
    pub lambda1: f64,
    /// Weight on |F_s| (prefer stronger emphasis).
    pub lambda2: f64,
    /// Search ceiling for the non-semantic rate.
    pub max_speedup: f64,
}

impl SpeedupProblem {
    pub fn total_frames(&self) -> usize {
        self.semantic_frames + self.non_semantic_frames
    }

    /// Fraction of frames that are semantic.
    pub fn semantic_fraction(&self) -> f64 {
        self.semantic_frames as f64 / self.total_frames() as f64
    }

    fn validate(&self) -> Result<()> {
        if self.total_frames() == 0 {
            return Err(Error::InvalidArgument(
                "the video must contain at least one frame".into(),
            ));
        }
        if !(self.required >= 1.0) {
            return Err(Error::InvalidArgument(
                "required speed-up must be at least 1".into(),
            ));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidArgument(
                "regularizers must be non-negative".into(),
            ));
        }
        if self.max_speedup < self.required {
            return Err(Error::InvalidArgument(
                "max speed-up must be at least the required speed-up".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSolution {
    /// Rate for semantic segments.
    pub semantic: u32,
    /// Rate for non-semantic segments.
    pub non_semantic: u32,
    pub objective: f64,
    /// The energy residual at the optimum.
    pub residual: f64,
    pub semantic_fraction: f64,
}

impl SpeedupSolution {
    /// Overall rate achieved by this rate pair.
    pub fn achieved(&self, semantic_frames: usize, non_semantic_frames: usize) -> f64 {
        let total = (semantic_frames + non_semantic_frames) as f64;
        total
            / (semantic_frames as f64 / f64::from(self.semantic)
                + non_semantic_frames as f64 / f64::from(self.non_semantic))
    }
}

/// The length-matching energy: |total/required - (L_s/F_s + L_ns/F_ns)|.
pub fn energy(problem: &SpeedupProblem, semantic: u32, non_semantic: u32) -> Result<f64> {
    if semantic == 0 || non_semantic == 0 {
        return Err(Error::InvalidArgument("speed-ups must be at least 1".into()));
    }
    let ls = problem.semantic_frames as f64;
    let lns = problem.non_semantic_frames as f64;
    Ok(((ls + lns) / problem.required
        - (ls / f64::from(semantic) + lns / f64::from(non_semantic)))
    .abs())
}

/// Exhaustive minimization of `energy + lambda1 |F_ns - F_s| + lambda2 |F_s|`
/// over the constraint box
///
///   max(1, ceil(p_s F_d)) <= F_s <= F_d,   F_d <= F_ns <= F_max,
///
/// with deterministic tie-breaking toward smaller `F_s`, then smaller `F_ns`.
pub fn solve_speedups(problem: &SpeedupProblem) -> Result<SpeedupSolution> {
    problem.validate()?;
    let p_s = problem.semantic_fraction();
    let fs_lo = ((p_s * problem.required).ceil() as u32).max(1);
    let fs_hi = problem.required.floor() as u32;
    if fs_lo > fs_hi {
        return Err(Error::Infeasible {
            constraint: "r1/r3".into(),
            detail: format!(
                "lower bound max(1, ceil(p_s * F_d)) = {fs_lo} exceeds F_d = {}",
                problem.required
            ),
        });
    }
    let fns_lo = problem.required.ceil() as u32;
    let fns_hi = problem.max_speedup.floor() as u32;
    if fns_lo > fns_hi {
        return Err(Error::Infeasible {
            constraint: "r2".into(),
            detail: format!(
                "F_ns must lie in [{fns_lo}, {fns_hi}] which is empty"
            ),
        });
    }

    let mut best: Option<(f64, f64, u32, u32)> = None;
    for fs in fs_lo..=fs_hi {
        for fns in fns_lo..=fns_hi {
            let residual = energy(problem, fs, fns)?;
            let objective = residual
                + problem.lambda1 * (f64::from(fns) - f64::from(fs)).abs()
                + problem.lambda2 * f64::from(fs);
            let better = match best {
                None => true,
                Some((obj, ..)) => objective < obj,
            };
            if better {
                best = Some((objective, residual, fs, fns));
            }
        }
    }
    let (objective, residual, fs, fns) =
        best.expect("non-empty box always yields a candidate");
    Ok(SpeedupSolution {
        semantic: fs,
        non_semantic: fns,
        objective,
        residual,
        semantic_fraction: p_s,
    })
}
