//! Density-weighted centroids and the adaptive rules that shape them.
//!
//! The density `ψ(q) = exp(−‖q − p̄‖ / β)` pulls the centroid of the safe
//! cell toward a local point of interest `p̄`. `β` shrinks when the robot is
//! stuck behind its cell boundary and relaxes back otherwise, but never below
//! the value that keeps the centroid `d_u` inside the cell. `p̄` follows the
//! path waypoint, or a waypoint rotated by almost a right angle while the
//! robot is blocked, which gives every robot the same turning preference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{build_b, build_w, inflate_region, CorridorError, CorridorParams};
use crate::cwvd::{build_a, CwvdError, CwvdParams, RobotDisk};
use crate::geom::{discretize_stencil, project_visible, nearest_in_region, ConvexRegion, FovSpec, GeomError, GridSampling, HalfSpace, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum LloydError {
    #[error("no sample points")]
    EmptySampling,
    #[error("safe cell has no usable point")]
    InfeasibleCell,
    #[error(transparent)]
    Cwvd(#[from] CwvdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RuleState<T> {
    pub beta: T,
    pub p_bar: Vec3<T>,
    /// Whether `p_bar` is currently chasing the rotated waypoint.
    pub rotated: bool,
}

impl<T: Scalar> RuleState<T> {
    pub fn new(beta: T, p_bar: Vec3<T>) -> Self {
        Self { beta, p_bar, rotated: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RuleParams<T> {
    pub beta_d: T,
    pub k_beta: T,
    pub k_wp: T,
    pub d_1: T,
    pub d_2: T,
    pub d_3: T,
    pub d_4: T,
    pub d_u: T,
    /// Radians shaved off the quarter turn applied to the waypoint.
    pub epsilon_rot: T,
    pub beta_cap: T,
    pub beta_floor: T,
}

impl<T: Scalar> Default for RuleParams<T> {
    fn default() -> Self {
        Self {
            beta_d: T::lit(0.5),
            k_beta: T::one(),
            k_wp: T::one(),
            d_1: T::one(),
            d_2: T::one(),
            d_3: T::one(),
            d_4: T::one(),
            d_u: T::lit(0.3),
            epsilon_rot: T::lit(0.05),
            beta_cap: T::lit(50.0),
            beta_floor: T::lit(1e-3),
        }
    }
}

impl<T: Scalar> RuleParams<T> {
    pub fn is_valid(&self) -> bool {
        let pos = [self.beta_d, self.k_beta, self.k_wp, self.d_1, self.d_2, self.d_3, self.d_4, self.beta_cap, self.beta_floor];
        pos.iter().all(|v| *v > T::zero() && v.is_finite())
            && self.d_u >= T::zero()
            && self.epsilon_rot > T::zero()
            && self.epsilon_rot <= T::lit(0.2)
            && self.beta_floor < self.beta_cap
    }
}

pub fn psi<T: Scalar>(q: &Vec3<T>, p_bar: &Vec3<T>, beta: T) -> T {
    (-(*q - *p_bar).norm() / beta).exp()
}

/// Weighted mean of `points` with weights `w_k · exp(−dist_k / β)`.
/// Distances are shifted by their minimum so tiny `β` cannot underflow.
fn weighted_mean<T: Scalar>(points: &[Vec3<T>], weights: &[T], dist: &[T], beta: T) -> Vec3<T> {
    let d0 = dist.iter().copied().fold(T::infinity(), T::min);
    let mut acc = Vec3::zero();
    let mut total = T::zero();
    for ((q, w), d) in points.iter().zip(weights).zip(dist) {
        let psi = *w * (-(*d - d0) / beta).exp();
        acc += *q * psi;
        total += psi;
    }
    acc / total
}

fn distances<T: Scalar>(samples: &GridSampling<T>, p_bar: &Vec3<T>) -> Vec<T> {
    samples.points.iter().map(|q| (*q - *p_bar).norm()).collect()
}

/// ψ-weighted centroid of the samples.
pub fn centroid<T: Scalar>(samples: &GridSampling<T>, p_bar: &Vec3<T>, beta: T) -> Result<Vec3<T>, LloydError> {
    if samples.is_empty() {
        return Err(LloydError::EmptySampling);
    }
    Ok(weighted_mean(&samples.points, &samples.weights, &distances(samples, p_bar), beta))
}

/// Centroid of the unconstrained sensing ball, same density.
pub fn free_centroid<T: Scalar>(ball_samples: &GridSampling<T>, p_bar: &Vec3<T>, beta: T) -> Result<Vec3<T>, LloydError> {
    centroid(ball_samples, p_bar, beta)
}

/// Centroid-vs-β evaluator with the distances to `p̄` computed once.
struct BetaProbe<'a, T> {
    region: &'a ConvexRegion<T>,
    samples: &'a GridSampling<T>,
    dist: Vec<T>,
    d_u: T,
}

impl<'a, T: Scalar> BetaProbe<'a, T> {
    fn new(region: &'a ConvexRegion<T>, samples: &'a GridSampling<T>, p_bar: &Vec3<T>, d_u: T) -> Self {
        Self { region, samples, dist: distances(samples, p_bar), d_u }
    }

    fn feasible(&self, beta: T) -> bool {
        let c = weighted_mean(&self.samples.points, &self.samples.weights, &self.dist, beta);
        self.region.clearance(&c) >= self.d_u
    }

    fn search(&self, floor: T, cap: T) -> T {
        if self.feasible(floor) {
            return floor;
        }
        if !self.feasible(cap) {
            return cap;
        }
        let (mut lo, mut hi) = (floor, cap);
        for _ in 0..24 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Walk down a few fine steps in case clearance is not monotone in β.
        let step = T::lit(1e-3);
        let mut best = hi;
        for k in 1..=5 {
            let b = hi - step * T::lit(k as f64);
            if b < floor {
                break;
            }
            if self.feasible(b) {
                best = b;
            }
        }
        best
    }
}

/// Smallest `β ∈ [floor, cap]` whose centroid keeps at least `d_u` clearance
/// from the cell boundary; `cap` if none does.
pub fn beta_min<T: Scalar>(
    region: &ConvexRegion<T>,
    samples: &GridSampling<T>,
    p_bar: &Vec3<T>,
    d_u: T,
    params: &RuleParams<T>,
) -> Result<T, LloydError> {
    if samples.is_empty() {
        return Err(LloydError::EmptySampling);
    }
    Ok(BetaProbe::new(region, samples, p_bar, d_u).search(params.beta_floor, params.beta_cap))
}

fn congested<T: Scalar>(c_b: &Vec3<T>, c_s: &Vec3<T>, p: &Vec3<T>, near: T, apart: T) -> bool {
    (*c_b - *p).norm() < near && (*c_b - *c_s).norm() > apart
}

/// One explicit Euler step of the β rule, before clamping.
pub fn beta_step<T: Scalar>(beta: T, c_b: &Vec3<T>, c_s: &Vec3<T>, p: &Vec3<T>, dt: T, params: &RuleParams<T>) -> T {
    if congested(c_b, c_s, p, params.d_1, params.d_2) {
        beta - params.k_beta * beta * dt
    } else {
        beta - params.k_beta * (beta - params.beta_d) * dt
    }
}

/// β after one step, clamped to `[beta_min, beta_cap]`.
#[allow(clippy::too_many_arguments)]
pub fn update_beta<T: Scalar>(
    state: &RuleState<T>,
    c_b: &Vec3<T>,
    c_s: &Vec3<T>,
    p: &Vec3<T>,
    dt: T,
    params: &RuleParams<T>,
    region: &ConvexRegion<T>,
    samples: &GridSampling<T>,
) -> Result<T, LloydError> {
    let stepped = beta_step(state.beta, c_b, c_s, p, dt, params);
    let lower = beta_min(region, samples, &state.p_bar, params.d_u, params)?;
    Ok(stepped.max(lower).min(params.beta_cap))
}

/// Same result as [`update_beta`] whenever clearance grows with β, but the
/// bisection only runs when the stepped value is actually too small.
#[allow(clippy::too_many_arguments)]
pub fn update_beta_lazy<T: Scalar>(
    state: &RuleState<T>,
    c_b: &Vec3<T>,
    c_s: &Vec3<T>,
    p: &Vec3<T>,
    dt: T,
    params: &RuleParams<T>,
    region: &ConvexRegion<T>,
    samples: &GridSampling<T>,
) -> Result<T, LloydError> {
    if samples.is_empty() {
        return Err(LloydError::EmptySampling);
    }
    let stepped = beta_step(state.beta, c_b, c_s, p, dt, params).min(params.beta_cap);
    let probe = BetaProbe::new(region, samples, &state.p_bar, params.d_u);
    if stepped >= params.beta_floor && probe.feasible(stepped) {
        return Ok(stepped);
    }
    Ok(stepped.max(probe.search(params.beta_floor, params.beta_cap)))
}

/// The waypoint turned by `π/2 − ε_rot` about the vertical axis through `p`.
pub fn rotated_waypoint<T: Scalar>(wp: &Vec3<T>, p: &Vec3<T>, epsilon_rot: T) -> Vec3<T> {
    *p + (*wp - *p).rotate_z(T::FRAC_PI_2() - epsilon_rot)
}

/// One step of the `p̄` rule. Returns the new `p̄` and rotation flag.
#[allow(clippy::too_many_arguments)]
pub fn update_pbar<T: Scalar>(
    state: &RuleState<T>,
    wp: &Vec3<T>,
    c_b: &Vec3<T>,
    c_b_bar: &Vec3<T>,
    c_s: &Vec3<T>,
    p: &Vec3<T>,
    dt: T,
    params: &RuleParams<T>,
) -> (Vec3<T>, bool) {
    // Once the waypoint-centered centroid would take the robot farther than the
    // current one, the detour has done its job.
    if state.rotated && (*p - *c_b_bar).norm() > (*p - *c_b).norm() {
        return (*wp, false);
    }
    let (target, rotated) = if congested(c_b, c_s, p, params.d_3, params.d_4) {
        (rotated_waypoint(wp, p, params.epsilon_rot), true)
    } else {
        (*wp, state.rotated)
    };
    (state.p_bar + (target - state.p_bar) * (params.k_wp * dt), rotated)
}

/// Everything a robot knows at one control tick.
#[derive(Debug, Clone)]
pub struct AgentView<'a, T> {
    pub position: Vec3<T>,
    pub heading: Vec3<T>,
    pub radius: T,
    /// Radius of the sphere each cloud point is grown by. At least `radius`;
    /// larger when the cloud is a coarse sampling of the true surface.
    pub cloud_radius: T,
    pub fov: FovSpec<T>,
    pub r_s: T,
    pub resolution: T,
    /// Lattice offsets of the sensing ball, see [`crate::geom::ball_stencil`].
    pub stencil: &'a [Vec3<T>],
    pub neighbors: &'a [RobotDisk<T>],
    pub cloud: &'a [Vec3<T>],
    /// Extra fixed constraints such as arena walls.
    pub static_faces: &'a [HalfSpace<T>],
    pub waypoint: Vec3<T>,
    /// Projected centroid from the previous tick, used as second seed.
    pub previous_projection: Option<Vec3<T>>,
    pub state: RuleState<T>,
    pub dt: T,
}

#[derive(Debug, Clone)]
pub struct TickParams<T> {
    pub rules: RuleParams<T>,
    pub cwvd: CwvdParams<T>,
    pub corridor: CorridorParams,
}

impl<T: Scalar> Default for TickParams<T> {
    fn default() -> Self {
        Self { rules: RuleParams::default(), cwvd: CwvdParams::default(), corridor: CorridorParams::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TickOutput<T> {
    /// Centroid of the safe cell.
    pub c_b: Vec3<T>,
    /// Cell centroid with `p̄` placed on the waypoint.
    pub c_b_bar: Vec3<T>,
    /// Centroid of the unconstrained sensing ball.
    pub c_s: Vec3<T>,
    /// Nearest visible cell point to `c_b`.
    pub projection: Vec3<T>,
    pub state: RuleState<T>,
    pub cell: ConvexRegion<T>,
    pub samples: usize,
}

fn corridor_with_fallback<T: Scalar>(view: &AgentView<'_, T>, bound: &ConvexRegion<T>, params: &TickParams<T>) -> Result<Vec<HalfSpace<T>>, LloydError> {
    let p = view.position;
    let second = view.previous_projection.unwrap_or(p);
    match inflate_region(view.cloud, (p, second), view.cloud_radius, bound, &params.corridor) {
        Ok(c) => Ok(c),
        Err(CorridorError::SeedInCollision | CorridorError::PlaneLimit(_)) if second != p => {
            inflate_region(view.cloud, (p, p), view.cloud_radius, bound, &params.corridor).map_err(|_| LloydError::InfeasibleCell)
        }
        Err(_) => Err(LloydError::InfeasibleCell),
    }
}

/// Runs one full tick for one robot: safe cell, centroids, projection onto
/// the visible cell, and the rule updates.
pub fn pipeline_tick<T: Scalar>(view: &AgentView<'_, T>, params: &TickParams<T>) -> Result<TickOutput<T>, LloydError> {
    let p = view.position;
    let me = RobotDisk::new(p, view.radius);
    let a = build_a(&me, view.neighbors, &params.cwvd)?;
    let ball = ConvexRegion::ball(p, view.r_s);
    let c = corridor_with_fallback(view, &ball, params)?;
    let mut cell = build_b(&ball, &a, &c);
    cell.faces.extend_from_slice(view.static_faces);

    let samples = match discretize_stencil(&cell, view.resolution, view.stencil) {
        Ok(s) => s,
        Err(GeomError::EmptySampling) if cell.contains(&p) => GridSampling::from_points(view.resolution, vec![p]),
        Err(_) => return Err(LloydError::InfeasibleCell),
    };
    let ball_samples = GridSampling::from_points(view.resolution, view.stencil.iter().map(|o| p + *o).collect());

    let state = view.state;
    let c_b = centroid(&samples, &state.p_bar, state.beta)?;
    let c_b_bar = centroid(&samples, &view.waypoint, state.beta)?;
    let c_s = free_centroid(&ball_samples, &state.p_bar, state.beta)?;

    let visible = build_w(&cell, view.fov, p, view.heading);
    let w_samples = visible.filter(&samples);
    let projection = if w_samples.is_empty() {
        nearest_in_region(&cell, &c_b, &samples)
    } else {
        project_visible(&cell, &view.fov, &p, &view.heading, &c_b, &w_samples)
    }
    .map_err(|_| LloydError::InfeasibleCell)?;

    let beta = update_beta_lazy(&state, &c_b, &c_s, &p, view.dt, &params.rules, &cell, &samples)?;
    let (p_bar, rotated) = update_pbar(&state, &view.waypoint, &c_b, &c_b_bar, &c_s, &p, view.dt, &params.rules);
    Ok(TickOutput {
        c_b,
        c_b_bar,
        c_s,
        projection,
        state: RuleState { beta, p_bar, rotated },
        cell,
        samples: samples.len(),
    })
}
