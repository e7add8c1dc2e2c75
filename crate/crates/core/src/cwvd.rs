//! Buffered Voronoi half-spaces that keep a robot away from its neighbors.
//!
//! Each neighbor contributes one half-space. Both robot centers are first
//! pushed toward each other by the sum of the radii; the separating plane is
//! then placed between the two buffered points. When the robots are closer
//! than twice that sum the buffered points cross and the half-space flips to
//! the far side of the neighbor's buffered point, which pushes the robot away.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{HalfSpace, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CwvdError {
    #[error("robots {0} and {1} share a position")]
    CoincidentRobots(usize, usize),
}

/// A robot seen as a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RobotDisk<T> {
    pub position: Vec3<T>,
    pub radius: T,
}

impl<T: Scalar> RobotDisk<T> {
    pub fn new(position: Vec3<T>, radius: T) -> Self {
        Self { position, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwvdParams<T> {
    /// Where the plane sits between the two buffered points, in `[0, 1]`.
    pub epsilon_sep: T,
}

impl<T: Scalar> Default for CwvdParams<T> {
    fn default() -> Self {
        Self { epsilon_sep: T::lit(0.5) }
    }
}

fn min_separation<T: Scalar>() -> T {
    T::lit(1e-9)
}

/// Returns `(p̃_i, p̃_j)`: each center moved toward the other by `δ_i + δ_j`.
pub fn buffered_points<T: Scalar>(i: &RobotDisk<T>, j: &RobotDisk<T>) -> Result<(Vec3<T>, Vec3<T>), CwvdError> {
    let diff = j.position - i.position;
    let d = diff.norm();
    if d < min_separation() {
        return Err(CwvdError::CoincidentRobots(0, 1));
    }
    let u = diff / d;
    let delta = i.radius + j.radius;
    Ok((i.position + u * delta, j.position - u * delta))
}

/// The half-space of robot `i` induced by neighbor `j`.
pub fn neighbor_halfspace<T: Scalar>(
    i: &RobotDisk<T>,
    j: &RobotDisk<T>,
    params: &CwvdParams<T>,
) -> Result<HalfSpace<T>, CwvdError> {
    let (bi, bj) = buffered_points(i, j)?;
    let diff = j.position - i.position;
    let d = diff.norm();
    let u = diff / d;
    let delta = i.radius + j.radius;
    let n_raw = bj - bi;
    let a = bi + n_raw * params.epsilon_sep;
    // At d = 2Δ the normal vanishes; use its limit direction from the side we are on.
    let n = if n_raw.norm() < min_separation() {
        if d >= delta + delta {
            u
        } else {
            -u
        }
    } else {
        n_raw
    };
    let own_shift = (bi - i.position).norm();
    let other_shift = (bj - i.position).norm();
    if own_shift <= other_shift {
        Ok(HalfSpace::closed(n, a))
    } else {
        // {q : n·(q − p̃_j) > 0}
        Ok(HalfSpace::open(-n, bj))
    }
}

/// All neighbor half-spaces of `me`. An empty list means no constraint.
pub fn build_a<T: Scalar>(
    me: &RobotDisk<T>,
    neighbors: &[RobotDisk<T>],
    params: &CwvdParams<T>,
) -> Result<Vec<HalfSpace<T>>, CwvdError> {
    neighbors
        .iter()
        .enumerate()
        .map(|(k, nb)| {
            neighbor_halfspace(me, nb, params).map_err(|_| CwvdError::CoincidentRobots(0, k + 1))
        })
        .collect()
}
