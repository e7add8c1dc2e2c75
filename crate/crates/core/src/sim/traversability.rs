//! Mean straight-line free travel from random poses.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::world::Obstacle;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TraversabilityError {
    #[error("no trials requested")]
    NoTrials,
    #[error("could not find a free start position")]
    NoFreeSpace,
}

/// Horizontal footprint of the arena.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Footprint {
    Rect { lo: [f64; 2], hi: [f64; 2] },
    Disk { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartMode {
    Uniform,
    /// Every trial starts here; only the direction is random.
    Fixed([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversabilityQuery<'a> {
    pub obstacles: &'a [Obstacle],
    pub footprint: Footprint,
    /// Height of the horizontal probing plane.
    pub z: f64,
    pub probe_radius: f64,
    pub trials: usize,
    /// Upper bound on a single travel distance.
    pub cap: f64,
    pub start: StartMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityEstimate {
    pub tau: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub trials: usize,
}

const MAX_REJECTIONS: usize = 10_000;

/// Smallest `t ≥ 0` with `|s + t·d − c| = r` for `s` outside the circle.
fn ray_circle_entry(s: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let w = [s[0] - c[0], s[1] - c[1]];
    let b = w[0] * d[0] + w[1] * d[1];
    let cc = w[0] * w[0] + w[1] * w[1] - r * r;
    let disc = b * b - cc;
    if disc < 0.0 || b > 0.0 {
        return None;
    }
    Some((-b - disc.sqrt()).max(0.0))
}

/// Distance to leave the disk from inside.
fn ray_circle_exit(s: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    let w = [s[0] - c[0], s[1] - c[1]];
    let b = w[0] * d[0] + w[1] * d[1];
    let cc = w[0] * w[0] + w[1] * w[1] - r * r;
    (-b + (b * b - cc).max(0.0).sqrt()).max(0.0)
}

fn ray_rect_exit(s: [f64; 2], d: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..2 {
        if d[k] > 0.0 {
            t = t.min((hi[k] - s[k]) / d[k]);
        } else if d[k] < 0.0 {
            t = t.min((lo[k] - s[k]) / d[k]);
        }
    }
    t.max(0.0)
}

/// Travel distance from `s` along unit `d` until the probe disk touches an
/// obstacle or its center leaves the footprint.
pub fn free_travel(q: &TraversabilityQuery<'_>, s: [f64; 2], d: [f64; 2]) -> f64 {
    let mut t = match q.footprint {
        Footprint::Rect { lo, hi } => ray_rect_exit(s, d, lo, hi),
        Footprint::Disk { center, radius } => ray_circle_exit(s, d, center, radius),
    };
    for o in q.obstacles {
        if let Some((c, r)) = o.slice(q.z) {
            if let Some(hit) = ray_circle_entry(s, d, c, r + q.probe_radius) {
                t = t.min(hit);
            }
        }
    }
    t.min(q.cap)
}

fn start_is_free(q: &TraversabilityQuery<'_>, s: [f64; 2]) -> bool {
    q.obstacles.iter().all(|o| match o.slice(q.z) {
        Some((c, r)) => (s[0] - c[0]).hypot(s[1] - c[1]) > r + q.probe_radius,
        None => true,
    })
}

fn sample_start<R: Rng>(q: &TraversabilityQuery<'_>, rng: &mut R) -> Result<[f64; 2], TraversabilityError> {
    for _ in 0..MAX_REJECTIONS {
        let s = match q.footprint {
            Footprint::Rect { lo, hi } => [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])],
            Footprint::Disk { center, radius } => {
                // area-uniform
                let r = radius * rng.random::<f64>().sqrt();
                let (sn, cs) = rng.random_range(0.0..std::f64::consts::TAU).sin_cos();
                [center[0] + r * cs, center[1] + r * sn]
            }
        };
        if start_is_free(q, s) {
            return Ok(s);
        }
    }
    Err(TraversabilityError::NoFreeSpace)
}

/// Monte-Carlo estimate of the mean free travel distance.
pub fn traversability<R: Rng>(q: &TraversabilityQuery<'_>, rng: &mut R) -> Result<TraversabilityEstimate, TraversabilityError> {
    if q.trials == 0 {
        return Err(TraversabilityError::NoTrials);
    }
    // Welford: exact for constant samples, stable otherwise
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=q.trials {
        let s = match q.start {
            StartMode::Uniform => sample_start(q, rng)?,
            StartMode::Fixed(s) => s,
        };
        let (sn, cs) = rng.random_range(0.0..std::f64::consts::TAU).sin_cos();
        let d = free_travel(q, s, [cs, sn]);
        let delta = d - mean;
        mean += delta / k as f64;
        m2 += delta * (d - mean);
    }
    let n = q.trials as f64;
    let tau = mean;
    let var = if q.trials > 1 { (m2 / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(TraversabilityEstimate { tau, std_err: (var / n).sqrt(), trials: q.trials })
}
