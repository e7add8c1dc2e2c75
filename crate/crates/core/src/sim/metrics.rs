use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

/// One physics-rate sample of a robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub p: Vec3<f64>,
    pub v: Vec3<f64>,
    pub a: Vec3<f64>,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    /// Path length until the goal region was reached (or the run ended).
    pub l: f64,
    /// Time to the goal region, or the run duration if never reached.
    pub t: f64,
    pub vbar: f64,
    pub vmax: f64,
    /// Closest center distance to any other robot. `None` when alone.
    pub dmin: Option<f64>,
    /// Closest center distance to an obstacle surface. `None` without obstacles.
    pub domin: Option<f64>,
    pub sr_acc: bool,
    pub sr_conv: bool,
    pub sr_safe: bool,
}

impl AgentReport {
    pub fn success(&self) -> bool {
        self.sr_acc && self.sr_conv && self.sr_safe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    /// Traversability of the generated world.
    pub tau: Option<f64>,
    /// Simulated time at the end of the run.
    pub duration: f64,
    pub agents: Vec<AgentReport>,
}

/// Running per-robot accumulators, updated once per physics step.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub length: f64,
    pub reached: Option<f64>,
    pub vmax: f64,
    pub dmin: Option<f64>,
    /// Smallest `distance − (δ_i + δ_j)` seen over all neighbors.
    pub pair_slack: Option<f64>,
    pub domin: Option<f64>,
    pub max_axis_acc: f64,
    pub collided: bool,
    pub delta: f64,
    last: Option<Vec3<f64>>,
    pub trajectory: Vec<Sample>,
}

impl Tracker {
    pub fn new(delta: f64) -> Self {
        Self { length: 0.0, reached: None, vmax: 0.0, dmin: None, pair_slack: None, domin: None, max_axis_acc: 0.0, collided: false, delta, last: None, trajectory: Vec::new() }
    }

    /// Records a sample. `neighbor` is the nearest center distance paired with
    /// the smallest clearance slack; `obstacle` the nearest surface distance.
    pub fn record(&mut self, s: Sample, goal_dist: f64, d_goal: f64, neighbor: Option<(f64, f64)>, obstacle: Option<f64>, keep: bool) {
        if let Some(prev) = self.last {
            if self.reached.is_none() {
                self.length += (s.p - prev).norm();
            }
        }
        self.last = Some(s.p);
        if self.reached.is_none() && goal_dist < d_goal {
            self.reached = Some(s.t);
        }
        self.vmax = self.vmax.max(s.v.norm());
        self.max_axis_acc = self.max_axis_acc.max(s.a.x.abs()).max(s.a.y.abs()).max(s.a.z.abs());
        let min = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        self.dmin = min(self.dmin, neighbor.map(|n| n.0));
        self.pair_slack = min(self.pair_slack, neighbor.map(|n| n.1));
        self.domin = min(self.domin, obstacle);
        if keep {
            self.trajectory.push(s);
        }
    }

    pub fn finalize(&self, agent: usize, end: f64, a_max: f64) -> AgentReport {
        finalize(agent, self, end, a_max)
    }
}

/// Turns accumulated samples into the reported metrics.
pub fn finalize(agent: usize, tr: &Tracker, end: f64, a_max: f64) -> AgentReport {
    let t = tr.reached.unwrap_or(end);
    let vbar = if t > 0.0 { tr.length / t } else { 0.0 };
    let safe = !tr.collided && tr.domin.is_none_or(|d| d >= tr.delta) && tr.pair_slack.is_none_or(|d| d >= 0.0);
    AgentReport {
        agent,
        l: tr.length,
        t,
        vbar,
        vmax: tr.vmax,
        dmin: tr.dmin,
        domin: tr.domin,
        sr_acc: tr.max_axis_acc <= a_max + 1e-6,
        sr_conv: tr.reached.is_some(),
        sr_safe: safe,
    }
}
