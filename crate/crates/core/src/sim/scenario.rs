use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{AlgoParams, SimParams, World};
use super::metrics::RunReport;
use super::sensor::SampledObstacles;
use super::traversability::{traversability, Footprint, StartMode, TraversabilityEstimate, TraversabilityQuery};
use super::world::{Agent, Arena, Obstacle};
use super::SimError;
use crate::geom::{FovSpec, Vec3};
use crate::plan::OccupancyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Circle,
    CircleObstacles,
    Forest,
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [ScenarioKind::Circle, ScenarioKind::CircleObstacles, ScenarioKind::Forest, ScenarioKind::Custom];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Circle => "circle",
            ScenarioKind::CircleObstacles => "circle_obstacles",
            ScenarioKind::Forest => "forest",
            ScenarioKind::Custom => "custom",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomAgent {
    pub start: Vec3<f64>,
    pub goal: Vec3<f64>,
    #[serde(default)]
    pub yaw: Option<f64>,
}

/// Geometry knobs of the generators. Each generator reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Radius of the start circle.
    pub radius: f64,
    /// Flight height at start; also the plane for 2D robots.
    pub altitude: f64,
    pub height: f64,
    /// Free border between the start circle (or forest) and the arena walls.
    pub margin: f64,
    /// Uniform horizontal jitter of start positions.
    pub jitter: f64,
    /// Uniform jitter of start altitude for robots that fly in 3D.
    pub altitude_jitter: f64,
    pub obstacle_count: usize,
    pub obstacle_radius: [f64; 2],
    /// Minimum gap between obstacle surfaces.
    pub obstacle_gap: f64,
    /// Keep-out around starts and goals.
    pub keep_out: f64,
    pub forest_size: [f64; 2],
    pub forest_spacing: f64,
    pub lane_spacing: f64,
    pub agents: Vec<CustomAgent>,
    pub obstacles: Vec<Obstacle>,
    pub arena: Option<Arena>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            radius: 15.0,
            altitude: 3.0,
            height: 6.0,
            margin: 3.0,
            jitter: 0.1,
            altitude_jitter: 0.1,
            obstacle_count: 33,
            obstacle_radius: [0.3, 0.6],
            obstacle_gap: 1.0,
            keep_out: 2.5,
            forest_size: [24.0, 28.0],
            forest_spacing: 4.0,
            lane_spacing: 3.0,
            agents: Vec::new(),
            obstacles: Vec::new(),
            arena: None,
        }
    }
}

/// One fully specified run, minus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub agents: usize,
    pub delta: f64,
    pub fov: FovSpec<f64>,
    #[serde(default)]
    pub geometry: ScenarioParams,
    #[serde(default)]
    pub algo: AlgoParams,
    #[serde(default)]
    pub sim: SimParams,
}

impl RunConfig {
    pub fn new(scenario: ScenarioKind, agents: usize, delta: f64, fov: FovSpec<f64>) -> Self {
        Self { scenario, agents, delta, fov, geometry: ScenarioParams::default(), algo: AlgoParams::default(), sim: SimParams::default() }
    }
}

/// A generated world before it is wrapped into a simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub arena: Arena,
    pub obstacles: Vec<Obstacle>,
    /// (start, goal, yaw)
    pub agents: Vec<(Vec3<f64>, Vec3<f64>, f64)>,
}

fn invalid(field: &str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig { field: field.to_string(), reason: reason.into() }
}

fn facing(from: &Vec3<f64>, to: &Vec3<f64>) -> f64 {
    let d = (*to - *from).horizontal();
    if d.norm() < 1e-9 {
        0.0
    } else {
        d.y.atan2(d.x)
    }
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..half_width)
    } else {
        0.0
    }
}

fn circle_agents(n: usize, g: &ScenarioParams, planar: bool, rng: &mut ChaCha8Rng) -> Vec<(Vec3<f64>, Vec3<f64>, f64)> {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|i| {
            let th = phase + std::f64::consts::TAU * i as f64 / n as f64;
            let (s, c) = th.sin_cos();
            let (x, y) = (g.radius * c + uniform(rng, g.jitter), g.radius * s + uniform(rng, g.jitter));
            // no two real vehicles hover at exactly the same height
            let z = if planar { g.altitude } else { g.altitude + uniform(rng, g.altitude_jitter) };
            let start = Vec3::new(x, y, z);
            let goal = Vec3::new(-g.radius * c, -g.radius * s, g.altitude);
            (start, goal, facing(&start, &goal))
        })
        .collect()
}

/// Dart throwing: accepts a candidate only if it keeps `gap` to every placed
/// obstacle and `keep_out` to all points in `avoid`.
fn scatter(
    count: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    inside: impl Fn(f64, f64) -> bool,
    g: &ScenarioParams,
    gap: f64,
    avoid: &[Vec3<f64>],
    rng: &mut ChaCha8Rng,
) -> Vec<Obstacle> {
    let mut out: Vec<Obstacle> = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 200 * count.max(1) {
        attempts += 1;
        let x = rng.random_range(lo[0]..hi[0]);
        let y = rng.random_range(lo[1]..hi[1]);
        let r = if g.obstacle_radius[1] > g.obstacle_radius[0] {
            rng.random_range(g.obstacle_radius[0]..g.obstacle_radius[1])
        } else {
            g.obstacle_radius[0]
        };
        if !inside(x, y) {
            continue;
        }
        let clear_of_agents = avoid.iter().all(|p| (p.x - x).hypot(p.y - y) > r + g.keep_out);
        let spaced = out.iter().all(|o| match o {
            Obstacle::Cylinder { center, radius, .. } => (center[0] - x).hypot(center[1] - y) >= r + radius + gap,
            Obstacle::Sphere { .. } => true,
        });
        if clear_of_agents && spaced {
            out.push(Obstacle::cylinder(x, y, r, 0.0, g.height));
        }
    }
    out
}

/// Builds the arena, obstacles, starts and goals for a scenario.
pub fn generate(cfg: &RunConfig, seed: u64) -> Result<Layout, SimError> {
    let g = &cfg.geometry;
    let n = cfg.agents;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planar = cfg.fov.is_planar();
    let layout = match cfg.scenario {
        ScenarioKind::Circle | ScenarioKind::CircleObstacles => {
            let agents = circle_agents(n, g, planar, &mut rng);
            let e = g.radius + g.margin;
            let arena = Arena::new(Vec3::new(-e, -e, 0.0), Vec3::new(e, e, g.height));
            let obstacles = if cfg.scenario == ScenarioKind::CircleObstacles {
                let avoid: Vec<_> = agents.iter().flat_map(|a| [a.0, a.1]).collect();
                let inner = g.radius - g.keep_out;
                scatter(g.obstacle_count, [-inner, -inner], [inner, inner], |x, y| x.hypot(y) <= inner, g, g.obstacle_gap, &avoid, &mut rng)
            } else {
                Vec::new()
            };
            Layout { arena, obstacles, agents }
        }
        ScenarioKind::Forest => {
            let [w, d] = g.forest_size;
            let row = (n.max(1) - 1) as f64 * g.lane_spacing;
            let half_w = (0.5 * w).max(0.5 * row + g.margin);
            let y0 = -0.5 * d - g.margin;
            let agents: Vec<_> = (0..n)
                .map(|i| {
                    let x = -0.5 * row + i as f64 * g.lane_spacing;
                    let (sx, sy) = (x + uniform(&mut rng, g.jitter), y0 + uniform(&mut rng, g.jitter));
                    let sz = if planar { g.altitude } else { g.altitude + uniform(&mut rng, g.altitude_jitter) };
                    let start = Vec3::new(sx, sy, sz);
                    let goal = Vec3::new(-x, -y0, g.altitude);
                    (start, goal, facing(&start, &goal))
                })
                .collect();
            let arena = Arena::new(Vec3::new(-half_w - g.margin, y0 - g.margin, 0.0), Vec3::new(half_w + g.margin, -y0 + g.margin, g.height));
            let avoid: Vec<_> = agents.iter().flat_map(|a| [a.0, a.1]).collect();
            let gap = (g.forest_spacing - 2.0 * g.obstacle_radius[1]).max(0.0);
            // enough darts to saturate the area
            let target = ((w * d) / (g.forest_spacing * g.forest_spacing)).ceil() as usize * 2;
            let obstacles = scatter(target, [-0.5 * w, -0.5 * d], [0.5 * w, 0.5 * d], |_, _| true, g, gap, &avoid, &mut rng);
            Layout { arena, obstacles, agents }
        }
        ScenarioKind::Custom => {
            if g.agents.len() != n {
                return Err(invalid("agents", format!("custom scenario lists {} robots but N = {n}", g.agents.len())));
            }
            let arena = g.arena.ok_or_else(|| invalid("geometry.arena", "custom scenario needs an arena"))?;
            let agents = g.agents.iter().map(|a| (a.start, a.goal, a.yaw.unwrap_or_else(|| facing(&a.start, &a.goal)))).collect();
            Layout { arena, obstacles: g.obstacles.clone(), agents }
        }
    };
    validate_layout(&layout, cfg.delta)?;
    Ok(layout)
}

fn validate_layout(l: &Layout, delta: f64) -> Result<(), SimError> {
    for (i, a) in l.agents.iter().enumerate() {
        if !l.arena.contains(&a.0) || !l.arena.contains(&a.1) {
            return Err(invalid("agents", format!("robot {i} starts or ends outside the arena")));
        }
        for (j, b) in l.agents.iter().enumerate().skip(i + 1) {
            if (a.0 - b.0).norm() <= 2.0 * delta {
                return Err(invalid("agents", format!("robots {i} and {j} overlap at start")));
            }
        }
        if l.obstacles.iter().any(|o| o.distance(&a.0) < delta) {
            return Err(invalid("agents", format!("robot {i} starts inside an obstacle")));
        }
    }
    if let Some(k) = l.obstacles.iter().position(|o| !o.within(&l.arena)) {
        return Err(invalid("obstacles", format!("obstacle {k} lies outside the arena")));
    }
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> Result<(), SimError> {
    let pos = |v: f64| v > 0.0 && v.is_finite();
    if cfg.agents == 0 && cfg.scenario != ScenarioKind::Custom {
        return Err(invalid("N", "must be at least 1"));
    }
    if !pos(cfg.delta) {
        return Err(invalid("delta", "must be positive"));
    }
    let f = &cfg.fov;
    if !(f.f_x > 0.0 && f.f_x <= 360.0) {
        return Err(invalid("fov.f_x", format!("{} is outside (0, 360]", f.f_x)));
    }
    if !(0.0..=360.0).contains(&f.f_z) {
        return Err(invalid("fov.f_z", format!("{} is outside [0, 360]", f.f_z)));
    }
    if !(-90.0..=90.0).contains(&f.f_a) {
        return Err(invalid("fov.f_a", format!("{} is outside [-90, 90]", f.f_a)));
    }
    if !cfg.algo.rules.is_valid() {
        return Err(invalid("rules", "all rule parameters must be positive, epsilon_rot in (0, 0.2]"));
    }
    if !(0.0..=1.0).contains(&cfg.algo.epsilon_sep) {
        return Err(invalid("epsilon_sep", "must lie in [0, 1]"));
    }
    if !cfg.algo.controller.is_valid() {
        return Err(invalid("controller", "weights must be non-negative, limits and steps positive"));
    }
    let s = &cfg.sim;
    for (name, v) in [
        ("sim.dt_physics", s.dt_physics),
        ("sim.dt_ctl", s.dt_ctl),
        ("sim.t_max", s.t_max),
        ("sim.d_goal", s.d_goal),
        ("sim.r_s", s.r_s),
        ("sim.resolution", s.resolution),
        ("sim.sensor_spacing", s.sensor_spacing),
        ("sim.map_cell", s.map_cell),
        ("sim.replan_period", s.replan_period),
    ] {
        if !pos(v) {
            return Err(invalid(name, "must be positive"));
        }
    }
    if s.dt_ctl < s.dt_physics {
        return Err(invalid("sim.dt_ctl", "must not be shorter than dt_physics"));
    }
    if !(s.sigma_obs >= 0.0) {
        return Err(invalid("sim.sigma_obs", "must be non-negative"));
    }
    if s.traversability_trials == 0 {
        return Err(invalid("sim.traversability_trials", "must be at least 1"));
    }
    let g = &cfg.geometry;
    for (name, v) in [("geometry.radius", g.radius), ("geometry.height", g.height), ("geometry.forest_spacing", g.forest_spacing)] {
        if !pos(v) {
            return Err(invalid(name, "must be positive"));
        }
    }
    if !(g.obstacle_radius[0] > 0.0 && g.obstacle_radius[1] >= g.obstacle_radius[0]) {
        return Err(invalid("geometry.obstacle_radius", "needs 0 < min ≤ max"));
    }
    if !(g.altitude > 0.0 && g.altitude < g.height) {
        return Err(invalid("geometry.altitude", "must lie strictly between floor and ceiling"));
    }
    Ok(())
}

/// Builds the simulator for `cfg` and `seed`.
pub fn build_world(cfg: &RunConfig, seed: u64) -> Result<World, SimError> {
    validate(cfg)?;
    let layout = generate(cfg, seed)?;
    let inflation = cfg.delta + cfg.algo.rules.d_u;
    let (lo, hi) = (layout.arena.lo, layout.arena.hi);
    let agents = layout
        .agents
        .iter()
        .map(|(start, goal, yaw)| {
            let grid = if cfg.fov.is_planar() {
                OccupancyGrid::planar(lo, hi, start.z, cfg.sim.map_cell, inflation)
            } else {
                OccupancyGrid::covering(lo, hi, cfg.sim.map_cell, inflation)
            };
            Agent::new(*start, *yaw, *goal, cfg.delta, cfg.fov, grid, cfg.algo.rules.beta_d)
        })
        .collect();
    let obstacles = SampledObstacles::new(layout.obstacles, cfg.sim.sensor_spacing);
    Ok(World::new(obstacles, layout.arena, agents, seed, cfg.sim.clone(), cfg.algo.clone()))
}

/// Traversability of a layout at the robots' flight height.
/// Region traversability is sampled over: the start circle for the circle
/// scenarios, the whole arena otherwise.
pub fn traversability_footprint(cfg: &RunConfig, arena: &Arena) -> Footprint {
    match cfg.scenario {
        ScenarioKind::Circle | ScenarioKind::CircleObstacles => Footprint::Disk { center: [0.0, 0.0], radius: cfg.geometry.radius },
        ScenarioKind::Forest | ScenarioKind::Custom => Footprint::Rect { lo: [arena.lo.x, arena.lo.y], hi: [arena.hi.x, arena.hi.y] },
    }
}

pub fn world_traversability(
    world: &World,
    footprint: Footprint,
    probe_radius: f64,
    z: f64,
    trials: usize,
    seed: u64,
) -> Result<TraversabilityEstimate, SimError> {
    let (lo, hi) = (world.arena.lo, world.arena.hi);
    let q = TraversabilityQuery {
        obstacles: &world.obstacles.obstacles,
        footprint,
        z,
        probe_radius,
        trials,
        cap: (hi - lo).horizontal().norm(),
        start: StartMode::Uniform,
    };
    // separate stream from the generator's
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7A0B_5EED);
    Ok(traversability(&q, &mut rng)?)
}

/// Traversability of `world` as reported for `cfg`: probe of the robot radius
/// at the nominal flight height.
pub fn run_traversability(cfg: &RunConfig, world: &World, seed: u64) -> Result<TraversabilityEstimate, SimError> {
    let footprint = traversability_footprint(cfg, &world.arena);
    world_traversability(world, footprint, cfg.delta, cfg.geometry.altitude, cfg.sim.traversability_trials, seed)
}

/// Generates, runs and reports one scenario. The finished world is returned
/// for trajectory output.
pub fn run_scenario(cfg: &RunConfig, seed: u64) -> Result<(RunReport, World), SimError> {
    let mut world = build_world(cfg, seed)?;
    let tau = run_traversability(cfg, &world, seed)?.tau;
    world.run();
    Ok((world.report(Some(tau)), world))
}
