//! Low-level tracking: heading gate, reference selection and the MPC.

mod mpc;

use serde::{Deserialize, Serialize};

pub use mpc::{rollout, sequence_cost, solve_mpc, zoh_step, MpcConfig, MpcError, MpcSolution};

use crate::geom::Vec3;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RobotState<T> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub a: Vec3<T>,
    pub yaw: T,
    pub yaw_rate: T,
}

impl<T: Scalar> RobotState<T> {
    pub fn at_rest(p: Vec3<T>, yaw: T) -> Self {
        Self { p, v: Vec3::zero(), a: Vec3::zero(), yaw, yaw_rate: T::zero() }
    }

    pub fn heading(&self) -> Vec3<T> {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c, s, T::zero())
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r > T::PI() {
        r -= two_pi;
    } else if r <= -T::PI() {
        r += two_pi;
    }
    r
}

/// Yaw pointing at the horizontal direction of `c_b − p`; holds the current
/// yaw when that direction is (almost) vertical.
pub fn desired_heading<T: Scalar>(c_b: &Vec3<T>, p: &Vec3<T>, current_yaw: T) -> T {
    let d = (*c_b - *p).horizontal();
    if d.norm() < T::lit(1e-6) {
        current_yaw
    } else {
        d.y.atan2(d.x)
    }
}

/// Whether the robot may translate: the horizontal direction to `c_b` must lie
/// strictly within half the horizontal field of view of the heading. A target
/// straight above or below always passes.
pub fn heading_gate<T: Scalar>(p: &Vec3<T>, c_b: &Vec3<T>, yaw: T, f_x: T) -> bool {
    let Some(dir) = (*c_b - *p).horizontal().try_normalize(T::lit(1e-6)) else {
        return true;
    };
    let (s, c) = yaw.sin_cos();
    dir.x * c + dir.y * s > (f_x / T::lit(2.0)).to_radians().cos()
}

/// `proj_w` when the gate passes, otherwise `p` itself (turn in place).
pub fn desired_position<T: Scalar>(proj_w: &Vec3<T>, p: &Vec3<T>, c_b: &Vec3<T>, yaw: T, f_x: T) -> Vec3<T> {
    if heading_gate(p, c_b, yaw, f_x) {
        *proj_w
    } else {
        *p
    }
}
