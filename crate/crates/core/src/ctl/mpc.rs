//! Per-axis jerk-input MPC.
//!
//! Each axis is a triple integrator driven by piecewise-constant jerk. The
//! horizon is condensed into a dense QP in the jerks with box limits on
//! jerk, velocity and acceleration, and solved exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{wrap_angle, RobotState};
use crate::geom::Vec3;
use crate::qp;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MpcError {
    #[error("initial state exceeds its bounds by more than 10%")]
    InfeasibleStart,
    #[error("invalid controller configuration")]
    BadConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct MpcConfig<T> {
    pub horizon: usize,
    pub dt: T,
    pub w_p: T,
    /// Heading weight; heading is tracked outside the QP by `yaw_gain`.
    pub w_h: T,
    pub w_u: T,
    /// Damping on velocity and acceleration at every predicted step. With
    /// these and `w_terminal` at zero the cost is pure tracking plus effort,
    /// which overshoots a step input.
    pub w_v: T,
    pub w_a: T,
    /// Extra weight on the final predicted state: position error, velocity
    /// and acceleration. Stops the plan from drifting at the horizon end.
    pub w_terminal: T,
    pub v_max: T,
    pub a_max: T,
    pub j_max: T,
    pub yaw_rate_max: T,
    pub yaw_gain: T,
    /// How long the first input is held before the next solve. Velocity is
    /// also bounded at that instant.
    pub dt_apply: T,
}

impl<T: Scalar> Default for MpcConfig<T> {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: T::lit(0.2),
            w_p: T::one(),
            w_h: T::one(),
            w_u: T::lit(0.05),
            w_v: T::lit(0.6),
            w_a: T::lit(0.0),
            w_terminal: T::lit(1000.0),
            v_max: T::lit(3.0),
            a_max: T::lit(3.0),
            j_max: T::lit(10.0),
            yaw_rate_max: T::lit(1.5),
            yaw_gain: T::lit(2.0),
            dt_apply: T::lit(0.1),
        }
    }
}

impl<T: Scalar> MpcConfig<T> {
    pub fn is_valid(&self) -> bool {
        self.horizon >= 2
            && [self.dt, self.v_max, self.a_max, self.j_max, self.yaw_rate_max, self.yaw_gain, self.w_u]
                .iter()
                .all(|v| *v > T::zero() && v.is_finite())
            && self.w_p >= T::zero()
            && self.w_h >= T::zero()
            && self.w_v >= T::zero()
            && self.w_a >= T::zero()
            && self.w_terminal >= T::zero()
            && self.dt_apply > T::zero()
            && self.dt_apply <= self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution<T> {
    /// Jerk inputs `u_0 … u_{N−1}`.
    pub inputs: Vec<Vec3<T>>,
    /// `x_0 … x_N`, obtained by rolling the inputs forward.
    pub states: Vec<RobotState<T>>,
    /// Commanded yaw rate for the first interval.
    pub yaw_rate: T,
    pub cost: T,
    /// True when the QP was infeasible and a braking input was used instead.
    pub fallback: bool,
}

/// Exact state after holding jerk `u` for `dt`: `(p, v, a)` per axis.
pub fn zoh_step<T: Scalar>(p: T, v: T, a: T, u: T, dt: T) -> (T, T, T) {
    let dt2 = dt * dt;
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    (p + v * dt + half * a * dt2 + sixth * u * dt2 * dt, v + a * dt + half * u * dt2, a + u * dt)
}

/// Rolls `inputs` forward from `x0` with step `dt`.
pub fn rollout<T: Scalar>(x0: &RobotState<T>, inputs: &[Vec3<T>], dt: T) -> Vec<RobotState<T>> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut x = *x0;
    states.push(x);
    for u in inputs {
        let mut next = x;
        for k in 0..3 {
            let (p, v, a) = zoh_step(x.p[k], x.v[k], x.a[k], u[k], dt);
            next.p = set(next.p, k, p);
            next.v = set(next.v, k, v);
            next.a = set(next.a, k, a);
        }
        x = next;
        states.push(x);
    }
    states
}

fn set<T: Scalar>(mut v: Vec3<T>, k: usize, val: T) -> Vec3<T> {
    match k {
        0 => v.x = val,
        1 => v.y = val,
        _ => v.z = val,
    }
    v
}

/// Linear response of `(p, v, a)` at step `k` to a unit jerk at step `j < k`.
struct Condensed<T> {
    n: usize,
    /// `[k][j]`, k = 1..=N stored at k−1.
    gp: Vec<T>,
    gv: Vec<T>,
    ga: Vec<T>,
}

impl<T: Scalar> Condensed<T> {
    fn new(n: usize, dt: T) -> Self {
        let mut gp = vec![T::zero(); n * n];
        let mut gv = vec![T::zero(); n * n];
        let mut ga = vec![T::zero(); n * n];
        for j in 0..n {
            // unit jerk at step j, zero state otherwise
            let (mut p, mut v, mut a) = zoh_step(T::zero(), T::zero(), T::zero(), T::one(), dt);
            for k in j + 1..=n {
                gp[(k - 1) * n + j] = p;
                gv[(k - 1) * n + j] = v;
                ga[(k - 1) * n + j] = a;
                let s = zoh_step(p, v, a, T::zero(), dt);
                p = s.0;
                v = s.1;
                a = s.2;
            }
        }
        Self { n, gp, gv, ga }
    }
}

fn clamp_start<T: Scalar>(x: T, limit: T) -> Result<T, MpcError> {
    if x.abs() > limit * T::lit(1.1) || !x.is_finite() {
        return Err(MpcError::InfeasibleStart);
    }
    Ok(x.max(-limit).min(limit))
}

struct AxisResult<T> {
    inputs: Vec<T>,
    fallback: bool,
}

fn solve_axis<T: Scalar>(p0: T, v0: T, a0: T, reference: T, cfg: &MpcConfig<T>, g: &Condensed<T>) -> AxisResult<T> {
    let n = g.n;
    // free response
    let mut fp = Vec::with_capacity(n);
    let mut fv = Vec::with_capacity(n);
    let mut fa = Vec::with_capacity(n);
    let (mut p, mut v, mut a) = (p0, v0, a0);
    for _ in 0..n {
        let s = zoh_step(p, v, a, T::zero(), cfg.dt);
        p = s.0;
        v = s.1;
        a = s.2;
        fp.push(p);
        fv.push(v);
        fa.push(a);
    }
    // ½uᵀHu + gᵀu: weighted Gram matrices of the position, velocity and
    // acceleration responses plus the jerk penalty on the diagonal.
    let weights = |k: usize| {
        let t = if k + 1 == n { cfg.w_terminal } else { T::zero() };
        (cfg.w_p + t, cfg.w_v + t, cfg.w_a + t)
    };
    let two = T::lit(2.0);
    let mut h = vec![T::zero(); n * n];
    let mut grad = vec![T::zero(); n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            for k in j.max(i)..n {
                let (wp, wv, wa) = weights(k);
                let r = k * n;
                s += wp * g.gp[r + i] * g.gp[r + j] + wv * g.gv[r + i] * g.gv[r + j] + wa * g.ga[r + i] * g.ga[r + j];
            }
            let val = two * s + if i == j { two * cfg.w_u } else { T::zero() };
            h[i * n + j] = val;
            h[j * n + i] = val;
        }
        let mut s = T::zero();
        for k in i..n {
            let (wp, wv, wa) = weights(k);
            let r = k * n;
            s += wp * g.gp[r + i] * (fp[k] - reference) + wv * g.gv[r + i] * fv[k] + wa * g.ga[r + i] * fa[k];
        }
        grad[i] = two * s;
    }

    let mut rows: Vec<T> = Vec::new();
    let mut rhs: Vec<T> = Vec::new();
    let mut unit = vec![T::zero(); n];
    for i in 0..n {
        unit.iter_mut().for_each(|x| *x = T::zero());
        unit[i] = T::one();
        // |u_i| ≤ j_max
        rows.extend_from_slice(&unit);
        rhs.push(cfg.j_max);
        rows.extend(unit.iter().map(|x| -*x));
        rhs.push(cfg.j_max);
    }
    for k in 0..n {
        let rv = &g.gv[k * n..(k + 1) * n];
        // v_k ∈ [−v_max, v_max]  ⇔  G_v u ≤ v_max − f_v  and  −G_v u ≤ v_max + f_v
        rows.extend_from_slice(rv);
        rhs.push(cfg.v_max - fv[k]);
        rows.extend(rv.iter().map(|x| -*x));
        rhs.push(cfg.v_max + fv[k]);
        let ra = &g.ga[k * n..(k + 1) * n];
        rows.extend_from_slice(ra);
        rhs.push(cfg.a_max - fa[k]);
        rows.extend(ra.iter().map(|x| -*x));
        rhs.push(cfg.a_max + fa[k]);
    }
    {
        // velocity at the moment the next solve takes over
        let t = cfg.dt_apply;
        let (_, vt, _) = zoh_step(T::zero(), v0, a0, T::zero(), t);
        let (_, gvt, _) = zoh_step(T::zero(), T::zero(), T::zero(), T::one(), t);
        let mut row = vec![T::zero(); n];
        row[0] = gvt;
        rows.extend_from_slice(&row);
        rhs.push(cfg.v_max - vt);
        rows.extend(row.iter().map(|x| -*x));
        rhs.push(cfg.v_max + vt);
    }

    let tol = T::epsilon() * T::lit(1e3);
    match qp::solve(n, Some(&h), &grad, &rows, &rhs, tol) {
        Ok(sol) => AxisResult { inputs: sol.x.into_iter().map(|u| u.max(-cfg.j_max).min(cfg.j_max)).collect(), fallback: false },
        Err(_) => AxisResult { inputs: brake(v0, a0, cfg), fallback: true },
    }
}

/// Jerk sequence that drives acceleration, then velocity, toward zero.
fn brake<T: Scalar>(v0: T, a0: T, cfg: &MpcConfig<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(cfg.horizon);
    let (mut v, mut a) = (v0, a0);
    let tau = cfg.dt * T::lit(2.0);
    for _ in 0..cfg.horizon {
        let a_target = (-v / tau).max(-cfg.a_max).min(cfg.a_max);
        let u = ((a_target - a) / cfg.dt).max(-cfg.j_max).min(cfg.j_max);
        let s = zoh_step(T::zero(), v, a, u, cfg.dt);
        v = s.1;
        a = s.2;
        out.push(u);
    }
    out
}

fn objective<T: Scalar>(states: &[RobotState<T>], inputs: &[Vec3<T>], reference: &Vec3<T>, cfg: &MpcConfig<T>) -> T {
    let track: T = states[1..].iter().map(|x| (x.p - *reference).norm_squared()).sum();
    let speed: T = states[1..].iter().map(|x| x.v.norm_squared()).sum();
    let accel: T = states[1..].iter().map(|x| x.a.norm_squared()).sum();
    let effort: T = inputs.iter().map(|u| u.norm_squared()).sum();
    let last = states[states.len() - 1];
    let terminal = (last.p - *reference).norm_squared() + last.v.norm_squared() + last.a.norm_squared();
    cfg.w_p * track + cfg.w_v * speed + cfg.w_a * accel + cfg.w_terminal * terminal + cfg.w_u * effort
}

/// Solves the tracking problem from `x0` toward `p_ref`, and the heading
/// command toward `yaw_ref`.
pub fn solve_mpc<T: Scalar>(x0: &RobotState<T>, p_ref: &Vec3<T>, yaw_ref: T, cfg: &MpcConfig<T>) -> Result<MpcSolution<T>, MpcError> {
    if !cfg.is_valid() {
        return Err(MpcError::BadConfig);
    }
    let mut start = *x0;
    for k in 0..3 {
        start.v = set(start.v, k, clamp_start(x0.v[k], cfg.v_max)?);
        start.a = set(start.a, k, clamp_start(x0.a[k], cfg.a_max)?);
    }
    let g = Condensed::new(cfg.horizon, cfg.dt);
    let mut inputs = vec![Vec3::zero(); cfg.horizon];
    let mut fallback = false;
    for k in 0..3 {
        let r = solve_axis(start.p[k], start.v[k], start.a[k], p_ref[k], cfg, &g);
        fallback |= r.fallback;
        for (i, u) in r.inputs.into_iter().enumerate() {
            inputs[i] = set(inputs[i], k, u);
        }
    }
    let states = rollout(&start, &inputs, cfg.dt);
    let cost = objective(&states, &inputs, p_ref, cfg);
    let yaw_rate = (cfg.yaw_gain * wrap_angle(yaw_ref - x0.yaw)).max(-cfg.yaw_rate_max).min(cfg.yaw_rate_max);
    Ok(MpcSolution { inputs, states, yaw_rate, cost, fallback })
}

/// Objective of an input sequence, for comparisons.
pub fn sequence_cost<T: Scalar>(x0: &RobotState<T>, inputs: &[Vec3<T>], p_ref: &Vec3<T>, cfg: &MpcConfig<T>) -> T {
    objective(&rollout(x0, inputs, cfg.dt), inputs, p_ref, cfg)
}
