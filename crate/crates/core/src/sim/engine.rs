use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{RunReport, Sample, Tracker};
use super::sensor::{sense, Pose, SampledObstacles, SensorModel, SensorSnapshot};
use super::world::{Agent, Arena};
use crate::corridor::CorridorParams;
use crate::ctl::{desired_heading, desired_position, solve_mpc, wrap_angle, zoh_step, MpcConfig};
use crate::cwvd::CwvdParams;
use crate::geom::{ball_stencil, HalfSpace, Vec3};
use crate::lloyd::{pipeline_tick, AgentView, RuleParams, TickParams};
use crate::plan::{plan_path, select_waypoint};

/// Timing, sensing and bookkeeping knobs of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt_physics: f64,
    pub dt_ctl: f64,
    pub t_max: f64,
    /// Radius of the goal region.
    pub d_goal: f64,
    /// Sensing radius, also the radius of the cell ball.
    pub r_s: f64,
    /// Lattice pitch used to sample cells.
    pub resolution: f64,
    pub sensor_spacing: f64,
    pub sigma_obs: f64,
    pub occlusion: bool,
    pub map_cell: f64,
    pub replan_period: f64,
    /// Waypoint lookahead; `r_s − d_u` when absent.
    pub lookahead: Option<f64>,
    pub traversability_trials: usize,
    pub record_trajectories: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_physics: 0.01,
            dt_ctl: 0.1,
            t_max: 120.0,
            d_goal: 1.0,
            r_s: 5.0,
            resolution: 0.25,
            sensor_spacing: 0.1,
            sigma_obs: 0.0,
            occlusion: false,
            map_cell: 0.25,
            replan_period: 0.5,
            lookahead: None,
            traversability_trials: 10_000,
            record_trajectories: true,
        }
    }
}

impl SimParams {
    /// Physics steps per control tick.
    pub fn ctl_every(&self) -> u64 {
        ((self.dt_ctl / self.dt_physics).round() as u64).max(1)
    }

    pub fn sensor(&self) -> SensorModel {
        SensorModel { range: self.r_s, spacing: self.sensor_spacing, sigma_obs: self.sigma_obs, occlusion: self.occlusion }
    }
}

/// Parameters of the navigation algorithm itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoParams {
    pub rules: RuleParams<f64>,
    pub epsilon_sep: f64,
    pub corridor: CorridorParams,
    pub controller: MpcConfig<f64>,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self { rules: RuleParams::default(), epsilon_sep: 0.5, corridor: CorridorParams::default(), controller: MpcConfig::default() }
    }
}

impl AlgoParams {
    pub fn tick_params(&self) -> TickParams<f64> {
        TickParams { rules: self.rules, cwvd: CwvdParams { epsilon_sep: self.epsilon_sep }, corridor: self.corridor }
    }
}

/// The lockstep multi-robot world.
#[derive(Debug, Clone)]
pub struct World {
    pub obstacles: SampledObstacles,
    pub arena: Arena,
    pub agents: Vec<Agent>,
    pub trackers: Vec<Tracker>,
    pub time: f64,
    pub steps: u64,
    pub seed: u64,
    pub params: SimParams,
    pub algo: AlgoParams,
    stencil: Vec<Vec3<f64>>,
    stencil_planar: Vec<Vec3<f64>>,
}

/// Everything shared read-only by the robots during one control tick.
struct TickContext<'a> {
    obstacles: &'a SampledObstacles,
    poses: &'a [Pose],
    sensor: SensorModel,
    params: &'a SimParams,
    tick: TickParams<f64>,
    mpc: &'a MpcConfig<f64>,
    arena: &'a Arena,
    stencil: &'a [Vec3<f64>],
    stencil_planar: &'a [Vec3<f64>],
    seed: u64,
    tick_index: u64,
    time: f64,
}

impl World {
    pub fn new(obstacles: SampledObstacles, arena: Arena, agents: Vec<Agent>, seed: u64, params: SimParams, algo: AlgoParams) -> Self {
        let stencil = ball_stencil(params.r_s, params.resolution, false).unwrap_or_default();
        let stencil_planar = ball_stencil(params.r_s, params.resolution, true).unwrap_or_default();
        let trackers = agents.iter().map(|a| Tracker::new(a.delta)).collect();
        let mut w = Self { obstacles, arena, agents, trackers, time: 0.0, steps: 0, seed, params, algo, stencil, stencil_planar };
        w.record();
        w
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.agents
            .iter()
            .map(|a| Pose { position: a.state.p, heading: a.state.heading(), radius: a.delta, fov: a.fov })
            .collect()
    }

    /// What robot `i` sees right now.
    pub fn sense(&self, i: usize) -> SensorSnapshot {
        let tick = self.steps / self.params.ctl_every();
        sense(&self.obstacles, &self.poses(), i, &self.params.sensor(), self.seed, tick, self.time)
    }

    /// Every robot plans against the same frozen snapshot, then all inputs
    /// are swapped in at once.
    pub fn control_tick(&mut self) {
        let poses = self.poses();
        let cx = TickContext {
            obstacles: &self.obstacles,
            poses: &poses,
            sensor: self.params.sensor(),
            params: &self.params,
            tick: self.algo.tick_params(),
            mpc: &self.algo.controller,
            arena: &self.arena,
            stencil: &self.stencil,
            stencil_planar: &self.stencil_planar,
            seed: self.seed,
            tick_index: self.steps / self.params.ctl_every(),
            time: self.time,
        };
        self.agents.par_iter_mut().enumerate().for_each(|(i, a)| control_agent(a, i, &cx));
    }

    /// Advances one physics step, running the controllers first when due.
    pub fn step(&mut self) {
        if self.steps.is_multiple_of(self.params.ctl_every()) {
            self.control_tick();
        }
        let dt = self.params.dt_physics;
        for a in self.agents.iter_mut().filter(|a| !a.frozen) {
            let s = &mut a.state;
            let u = a.jerk;
            let (px, vx, ax) = zoh_step(s.p.x, s.v.x, s.a.x, u.x, dt);
            let (py, vy, ay) = zoh_step(s.p.y, s.v.y, s.a.y, u.y, dt);
            let (pz, vz, az) = zoh_step(s.p.z, s.v.z, s.a.z, u.z, dt);
            s.p = Vec3::new(px, py, pz);
            s.v = Vec3::new(vx, vy, vz);
            s.a = Vec3::new(ax, ay, az);
            s.yaw = wrap_angle(s.yaw + a.yaw_rate_cmd * dt);
            s.yaw_rate = a.yaw_rate_cmd;
        }
        self.steps += 1;
        self.time = self.steps as f64 * dt;
        self.check_collisions();
        self.record();
    }

    fn check_collisions(&mut self) {
        let n = self.agents.len();
        let mut hit = vec![false; n];
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                if (a.state.p - b.state.p).norm() < a.delta + b.delta {
                    hit[i] = true;
                    hit[j] = true;
                }
            }
            let a = &self.agents[i];
            if self.obstacles.distance(&a.state.p).is_some_and(|d| d < a.delta) {
                hit[i] = true;
            }
        }
        for (i, h) in hit.into_iter().enumerate() {
            if h && !self.agents[i].frozen {
                let a = &mut self.agents[i];
                a.frozen = true;
                a.state.v = Vec3::zero();
                a.state.a = Vec3::zero();
                a.jerk = Vec3::zero();
                a.yaw_rate_cmd = 0.0;
                self.trackers[i].collided = true;
            }
        }
    }

    fn record(&mut self) {
        let keep = self.params.record_trajectories;
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            let neighbor = self
                .agents
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| {
                    let d = (a.state.p - b.state.p).norm();
                    (d, d - a.delta - b.delta)
                })
                .reduce(|x, y| (x.0.min(y.0), x.1.min(y.1)));
            let obstacle = self.obstacles.distance(&a.state.p);
            let s = &a.state;
            let sample = Sample { t: self.time, p: s.p, v: s.v, a: s.a, yaw: s.yaw };
            let goal_dist = (a.goal - s.p).norm();
            self.trackers[i].record(sample, goal_dist, self.params.d_goal, neighbor, obstacle, keep);
        }
    }

    /// Everyone has reached the goal region or is frozen.
    pub fn settled(&self) -> bool {
        self.agents.iter().zip(&self.trackers).all(|(a, t)| a.frozen || t.reached.is_some())
    }

    /// Steps until settled or out of time.
    pub fn run(&mut self) {
        let max_steps = (self.params.t_max / self.params.dt_physics).round() as u64;
        while !self.settled() && self.steps < max_steps {
            self.step();
        }
    }

    pub fn report(&self, tau: Option<f64>) -> RunReport {
        let a_max = self.algo.controller.a_max;
        RunReport {
            seed: self.seed,
            tau,
            duration: self.time,
            agents: self.trackers.iter().enumerate().map(|(i, t)| t.finalize(i, self.time, a_max)).collect(),
        }
    }
}

/// Straight toward the goal, stopping at the edge of the sensing ball.
fn straight_waypoint(p: &Vec3<f64>, goal: &Vec3<f64>, reach: f64) -> Vec3<f64> {
    let d = *goal - *p;
    let n = d.norm();
    if n <= reach {
        *goal
    } else {
        *p + d * (reach / n)
    }
}

/// Point spheres of this radius on a surface sampled every `spacing` leave no
/// hole shallower than `delta`.
pub fn cloud_radius(delta: f64, spacing: f64) -> f64 {
    (delta * delta + 0.5 * spacing * spacing).sqrt()
}

fn control_agent(a: &mut Agent, i: usize, cx: &TickContext<'_>) {
    if a.frozen {
        return;
    }
    let snap = sense(cx.obstacles, cx.poses, i, &cx.sensor, cx.seed, cx.tick_index, cx.time);
    let p = a.state.p;
    let planar = a.fov.is_planar();

    let fresh = a.grid.update_map(&snap.cloud);
    let due = a.last_replan.is_none_or(|t| cx.time - t >= cx.params.replan_period - 1e-9);
    let stale = !fresh.is_empty()
        && a.path.as_ref().is_some_and(|path| path.waypoints.windows(2).any(|w| !a.grid.line_clear(&w[0], &w[1])));
    if due || stale {
        a.path = plan_path(&mut a.grid, &p, &a.goal).ok();
        a.last_replan = Some(cx.time);
    }
    let lookahead = cx.params.lookahead.unwrap_or(cx.params.r_s - cx.tick.rules.d_u);
    a.waypoint = match &a.path {
        Some(path) => select_waypoint(path, &p, lookahead, Some(&a.grid)),
        None => straight_waypoint(&p, &a.goal, lookahead),
    };
    if planar {
        a.waypoint.z = p.z;
    }

    let walls: Vec<HalfSpace<f64>> = cx.arena.walls(a.delta);
    let heading = a.state.heading();
    let view = AgentView {
        position: p,
        heading,
        radius: a.delta,
        cloud_radius: cloud_radius(a.delta, cx.params.sensor_spacing),
        fov: a.fov,
        r_s: cx.params.r_s,
        resolution: cx.params.resolution,
        stencil: if planar { cx.stencil_planar } else { cx.stencil },
        neighbors: &snap.neighbors,
        cloud: &snap.cloud,
        static_faces: &walls,
        waypoint: a.waypoint,
        previous_projection: a.previous_projection,
        state: a.rules,
        dt: cx.params.dt_ctl,
    };
    let yaw = a.state.yaw;
    let (target, yaw_ref) = match pipeline_tick(&view, &cx.tick) {
        Ok(out) => {
            a.rules = out.state;
            a.previous_projection = Some(out.projection);
            a.centroid = Some(out.c_b);
            (desired_position(&out.projection, &p, &out.c_b, yaw, a.fov.f_x), desired_heading(&out.c_b, &p, yaw))
        }
        Err(_) => {
            a.previous_projection = None;
            a.centroid = None;
            (p, yaw)
        }
    };
    match solve_mpc(&a.state, &target, yaw_ref, cx.mpc) {
        Ok(sol) => {
            a.jerk = sol.inputs[0];
            a.yaw_rate_cmd = sol.yaw_rate;
        }
        Err(_) => {
            // brake as hard as the jerk limit allows
            let j = cx.mpc.j_max;
            a.jerk = (a.state.a * (-1.0 / cx.params.dt_ctl)).map(|u| u.clamp(-j, j));
            a.yaw_rate_cmd = 0.0;
        }
    }
    if planar {
        a.jerk.z = 0.0;
    }
}
