//! Obstacle-free convex corridor around a pair of seed points, plus assembly
//! of the per-robot safe cell and its visible part.
//!
//! Obstacle points are treated as balls of the robot radius. An ellipsoid with
//! its foci on the seeds defines a metric; the ball nearest in that metric is
//! cut off by the plane tangent to it at its metrically closest point, balls
//! behind the plane are dropped, and the process repeats until every ball is
//! cut off. The ellipsoid is then widened as far as the planes allow and the
//! cutting pass is repeated with the wider metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{ConvexRegion, FovSpec, GridSampling, HalfSpace, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CorridorError {
    #[error("obstacle point within the robot radius of the seed segment")]
    SeedInCollision,
    #[error("more than {0} separating planes needed")]
    PlaneLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorParams {
    pub max_planes: usize,
    /// Number of cut-then-widen rounds.
    pub passes: usize,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self { max_planes: 200, passes: 2 }
    }
}

/// Prolate spheroid with semi-axes `(√(f² + b²), b, b)` around `e1`.
#[derive(Debug, Clone, Copy)]
struct Spheroid<T> {
    center: Vec3<T>,
    axes: [Vec3<T>; 3],
    focal: T,
    minor: T,
}

impl<T: Scalar> Spheroid<T> {
    fn new(sa: &Vec3<T>, sb: &Vec3<T>, minor: T) -> Self {
        let center = (*sa + *sb) / T::lit(2.0);
        let axis = *sb - *sa;
        let focal = axis.norm() / T::lit(2.0);
        let e1 = axis.try_normalize(T::epsilon().sqrt()).unwrap_or_else(Vec3::unit_x);
        let (e2, e3) = e1.orthonormal_complement();
        Self { center, axes: [e1, e2, e3], focal, minor }
    }

    fn semi_axes(&self) -> [T; 3] {
        let major = (self.focal * self.focal + self.minor * self.minor).sqrt();
        [major, self.minor, self.minor]
    }

    fn local(&self, x: &Vec3<T>) -> [T; 3] {
        let d = *x - self.center;
        [self.axes[0].dot(&d), self.axes[1].dot(&d), self.axes[2].dot(&d)]
    }

    fn metric_local(&self, z: &[T; 3]) -> T {
        let s = self.semi_axes();
        (0..3).map(|k| (z[k] / s[k]).powi(2)).sum::<T>().sqrt()
    }

    /// Tangent plane to the ball `(o, r)` at its point of least metric value.
    /// Returns the plane and that metric value. Requires `o` at least `r`
    /// away from the center.
    fn separating_plane(&self, o: &Vec3<T>, r: T) -> (HalfSpace<T>, T) {
        let c = self.local(o);
        let s = self.semi_axes();
        // w_k = c_k / (1 + κ s_k²) with ‖w‖ = r; g(κ) is convex and decreasing,
        // so Newton from κ = 0 approaches the root from below.
        let g = |kappa: T| -> (T, T) {
            let mut val = -r * r;
            let mut der = T::zero();
            for k in 0..3 {
                let den = T::one() + kappa * s[k] * s[k];
                val += c[k] * c[k] / (den * den);
                der -= T::lit(2.0) * c[k] * c[k] * s[k] * s[k] / (den * den * den);
            }
            (val, der)
        };
        let mut kappa = T::zero();
        for _ in 0..100 {
            let (val, der) = g(kappa);
            if val <= T::zero() || der >= T::zero() {
                break;
            }
            let step = val / der;
            kappa -= step;
            if -step <= T::epsilon() * T::lit(4.0) * kappa.max(T::epsilon()) {
                break;
            }
        }
        let mut w = [T::zero(); 3];
        for k in 0..3 {
            w[k] = c[k] / (T::one() + kappa * s[k] * s[k]);
        }
        let wv = self.axes[0] * w[0] + self.axes[1] * w[1] + self.axes[2] * w[2];
        let n = wv.try_normalize(T::epsilon()).unwrap_or_else(|| {
            (*o - self.center).try_normalize(T::epsilon()).unwrap_or_else(Vec3::unit_x)
        });
        let x_star = *o - n * r;
        let z = [c[0] - w[0], c[1] - w[1], c[2] - w[2]];
        (HalfSpace::closed(n, x_star), self.metric_local(&z))
    }

    /// Lower bound on the metric value of any point of the ball `(o, r)`.
    fn lower_bound(&self, o: &Vec3<T>, r: T) -> T {
        self.metric_local(&self.local(o)) - r / self.minor
    }
}

struct Entry<T> {
    key: T,
    exact: bool,
    index: usize,
}

impl<T: Scalar> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Entry<T> {}
impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Entry<T> {
    // min-heap on (key, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .partial_cmp(&self.key)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn segment_distance<T: Scalar>(o: &Vec3<T>, a: &Vec3<T>, b: &Vec3<T>) -> T {
    let ab = *b - *a;
    let len2 = ab.norm_squared();
    let t = if len2 > T::zero() {
        ((*o - *a).dot(&ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    (*o - (*a + ab * t)).norm()
}

fn excluded<T: Scalar>(planes: &[HalfSpace<T>], o: &Vec3<T>, r: T) -> bool {
    let tol = T::lit(1e-9);
    planes.iter().any(|h| h.signed_distance(o) >= r - tol)
}

fn cut_pass<T: Scalar>(
    cloud: &[Vec3<T>],
    r: T,
    e: &Spheroid<T>,
    max_planes: usize,
) -> Result<Vec<HalfSpace<T>>, CorridorError> {
    let mut heap: BinaryHeap<Entry<T>> = cloud
        .iter()
        .enumerate()
        .map(|(index, o)| Entry { key: e.lower_bound(o, r), exact: false, index })
        .collect();
    let mut planes: Vec<HalfSpace<T>> = Vec::new();
    while let Some(top) = heap.pop() {
        let o = &cloud[top.index];
        if excluded(&planes, o, r) {
            continue;
        }
        let (plane, metric) = e.separating_plane(o, r);
        let still_nearest = top.exact || heap.peek().is_none_or(|next| metric <= next.key);
        if !still_nearest {
            heap.push(Entry { key: metric, exact: true, index: top.index });
            continue;
        }
        if planes.len() == max_planes {
            return Err(CorridorError::PlaneLimit(max_planes));
        }
        planes.push(plane);
    }
    Ok(planes)
}

/// Half-spaces whose intersection contains both seeds and keeps every point
/// at least `robot_radius` from every cloud point. Only cloud points that can
/// reach into `bound`'s ball matter.
pub fn inflate_region<T: Scalar>(
    cloud: &[Vec3<T>],
    seeds: (Vec3<T>, Vec3<T>),
    robot_radius: T,
    bound: &ConvexRegion<T>,
    params: &CorridorParams,
) -> Result<Vec<HalfSpace<T>>, CorridorError> {
    let (sa, sb) = seeds;
    let reach = bound.radius + robot_radius;
    let near: Vec<Vec3<T>> = cloud
        .iter()
        .filter(|o| (**o - bound.center).norm() <= reach)
        .copied()
        .collect();
    if near.is_empty() {
        return Ok(Vec::new());
    }
    let clearance = near
        .iter()
        .map(|o| segment_distance(o, &sa, &sb) - robot_radius)
        .fold(T::infinity(), T::min);
    if clearance < T::zero() {
        return Err(CorridorError::SeedInCollision);
    }
    let floor = T::lit(1e-6) * bound.radius.max(T::one());
    let mut e = Spheroid::new(&sa, &sb, (clearance / T::lit(2.0)).max(floor));
    let mut planes = Vec::new();
    for pass in 0..params.passes.max(1) {
        planes = cut_pass(&near, robot_radius, &e, params.max_planes)?;
        if pass + 1 == params.passes.max(1) {
            break;
        }
        // Widen: the support of the spheroid along each plane normal must stay
        // below the plane, and the spheroid must stay inside the bound ball.
        let f2 = e.focal * e.focal;
        let mut b2 = {
            let room = bound.radius - (e.center - bound.center).norm();
            room * room - f2
        };
        for h in &planes {
            let n = h.normal / h.normal.norm();
            let d = n.dot(&(h.point - e.center));
            let c = n.dot(&e.axes[0]);
            b2 = b2.min(d * d - f2 * c * c);
        }
        if b2 > e.minor * e.minor {
            e.minor = b2.sqrt();
        }
    }
    Ok(planes)
}

/// The safe cell: sensing ball ∩ neighbor half-spaces ∩ corridor half-spaces.
pub fn build_b<T: Scalar>(ball: &ConvexRegion<T>, a: &[HalfSpace<T>], c: &[HalfSpace<T>]) -> ConvexRegion<T> {
    let mut region = ball.clone();
    region.faces.extend_from_slice(a);
    region.faces.extend_from_slice(c);
    region
}

/// The part of a cell inside the robot's field of view.
#[derive(Debug, Clone)]
pub struct VisibleRegion<'a, T> {
    pub cell: &'a ConvexRegion<T>,
    pub fov: FovSpec<T>,
    pub position: Vec3<T>,
    pub heading: Vec3<T>,
}

impl<'a, T: Scalar> VisibleRegion<'a, T> {
    pub fn contains(&self, q: &Vec3<T>) -> bool {
        self.cell.contains(q) && self.fov.contains(&self.position, &self.heading, q)
    }

    /// Samples of the cell that are also visible.
    pub fn filter(&self, cell_samples: &GridSampling<T>) -> GridSampling<T> {
        cell_samples.filter(|q| self.fov.contains(&self.position, &self.heading, q))
    }
}

pub fn build_w<'a, T: Scalar>(
    cell: &'a ConvexRegion<T>,
    fov: FovSpec<T>,
    position: Vec3<T>,
    heading: Vec3<T>,
) -> VisibleRegion<'a, T> {
    VisibleRegion { cell, fov, position, heading }
}
