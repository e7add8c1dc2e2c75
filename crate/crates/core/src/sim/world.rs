use serde::{Deserialize, Serialize};

use crate::ctl::RobotState;
use crate::geom::{FovSpec, HalfSpace, Vec3};
use crate::lloyd::RuleState;
use crate::plan::{OccupancyGrid, Path};

/// Static obstacle. Cylinders stand upright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Cylinder { center: [f64; 2], radius: f64, z_min: f64, z_max: f64 },
    Sphere { center: Vec3<f64>, radius: f64 },
}

impl Obstacle {
    pub fn cylinder(x: f64, y: f64, radius: f64, z_min: f64, z_max: f64) -> Self {
        Obstacle::Cylinder { center: [x, y], radius, z_min, z_max }
    }

    /// Signed distance from `p` to the surface, negative inside.
    pub fn distance(&self, p: &Vec3<f64>) -> f64 {
        match *self {
            Obstacle::Sphere { center, radius } => (*p - center).norm() - radius,
            Obstacle::Cylinder { center, radius, z_min, z_max } => {
                let dr = (p.x - center[0]).hypot(p.y - center[1]) - radius;
                let dz = (z_min - p.z).max(p.z - z_max);
                if dr <= 0.0 && dz <= 0.0 {
                    dr.max(dz)
                } else {
                    dr.max(0.0).hypot(dz.max(0.0))
                }
            }
        }
    }

    pub fn bounding_sphere(&self) -> (Vec3<f64>, f64) {
        match *self {
            Obstacle::Sphere { center, radius } => (center, radius),
            Obstacle::Cylinder { center, radius, z_min, z_max } => {
                let half = 0.5 * (z_max - z_min);
                (Vec3::new(center[0], center[1], 0.5 * (z_min + z_max)), radius.hypot(half))
            }
        }
    }

    /// Horizontal cross-section at height `z`, as (center, radius).
    pub fn slice(&self, z: f64) -> Option<([f64; 2], f64)> {
        match *self {
            Obstacle::Sphere { center, radius } => {
                let h = (z - center.z).abs();
                (h <= radius).then(|| ([center.x, center.y], (radius * radius - h * h).sqrt()))
            }
            Obstacle::Cylinder { center, radius, z_min, z_max } => (z >= z_min && z <= z_max).then_some((center, radius)),
        }
    }

    /// Outward surface normal at a point on (or near) the surface.
    pub fn normal_at(&self, q: &Vec3<f64>) -> Vec3<f64> {
        match *self {
            Obstacle::Sphere { center, .. } => (*q - center).try_normalize(1e-12).unwrap_or_else(Vec3::unit_z),
            Obstacle::Cylinder { center, radius, z_min, z_max } => {
                let radial = Vec3::new(q.x - center[0], q.y - center[1], 0.0);
                let side = (radial.norm() - radius).abs();
                if (q.z - z_max).abs() < side.min(1e-6).max(1e-9) || q.z > z_max {
                    Vec3::unit_z()
                } else if (q.z - z_min).abs() < side.min(1e-6).max(1e-9) || q.z < z_min {
                    -Vec3::unit_z()
                } else {
                    radial.try_normalize(1e-12).unwrap_or_else(Vec3::unit_x)
                }
            }
        }
    }

    /// Whether the segment `a → b` passes through the interior.
    pub fn blocks(&self, a: &Vec3<f64>, b: &Vec3<f64>) -> bool {
        // sample finely enough for the thinnest obstacles we generate
        let len = (*b - *a).norm();
        let (c, r) = self.bounding_sphere();
        if segment_point_distance(a, b, &c) > r {
            return false;
        }
        let steps = ((len / 0.02).ceil() as usize).max(1);
        (1..steps).any(|k| self.distance(&a.lerp(b, k as f64 / steps as f64)) < -1e-9)
    }

    /// Surface points at roughly `spacing` apart.
    pub fn surface_samples(&self, spacing: f64) -> Vec<Vec3<f64>> {
        let mut out = Vec::new();
        match *self {
            Obstacle::Sphere { center, radius } => {
                let area = 4.0 * std::f64::consts::PI * radius * radius;
                let n = ((area / (spacing * spacing)).ceil() as usize).max(1);
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for k in 0..n {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let (s, c) = (golden * k as f64).sin_cos();
                    out.push(center + Vec3::new(rho * c, rho * s, z) * radius);
                }
            }
            Obstacle::Cylinder { center, radius, z_min, z_max } => {
                let around = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize).max(3);
                let rings = (((z_max - z_min) / spacing).ceil() as usize).max(1);
                for i in 0..=rings {
                    let z = z_min + (z_max - z_min) * i as f64 / rings as f64;
                    push_circle(&mut out, center, radius, z, around);
                }
                // caps: evenly spaced rings, so no gap exceeds `spacing`
                let k = ((radius / spacing).ceil() as usize).max(1);
                for j in 1..k {
                    let r = radius * j as f64 / k as f64;
                    let n = ((2.0 * std::f64::consts::PI * r / spacing).ceil() as usize).max(3);
                    push_circle(&mut out, center, r, z_min, n);
                    push_circle(&mut out, center, r, z_max, n);
                }
                out.push(Vec3::new(center[0], center[1], z_min));
                out.push(Vec3::new(center[0], center[1], z_max));
            }
        }
        out
    }

    pub fn within(&self, arena: &Arena) -> bool {
        let (c, _) = self.bounding_sphere();
        arena.contains(&c)
    }
}

pub(crate) fn push_circle(out: &mut Vec<Vec3<f64>>, center: [f64; 2], radius: f64, z: f64, n: usize) {
    for k in 0..n {
        let (s, c) = (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin_cos();
        out.push(Vec3::new(center[0] + radius * c, center[1] + radius * s, z));
    }
}

fn segment_point_distance(a: &Vec3<f64>, b: &Vec3<f64>, c: &Vec3<f64>) -> f64 {
    let d = *b - *a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 { ((*c - *a).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (a.lerp(b, t) - *c).norm()
}

/// Axis-aligned box the robots live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub lo: Vec3<f64>,
    pub hi: Vec3<f64>,
}

impl Arena {
    pub fn new(lo: Vec3<f64>, hi: Vec3<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, p: &Vec3<f64>) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y && p.z >= self.lo.z && p.z <= self.hi.z
    }

    /// Six inward-facing walls pulled in by `margin`.
    pub fn walls(&self, margin: f64) -> Vec<HalfSpace<f64>> {
        let m = Vec3::new(margin, margin, margin);
        let (lo, hi) = (self.lo + m, self.hi - m);
        vec![
            HalfSpace::closed(-Vec3::unit_x(), lo),
            HalfSpace::closed(-Vec3::unit_y(), lo),
            HalfSpace::closed(-Vec3::unit_z(), lo),
            HalfSpace::closed(Vec3::unit_x(), hi),
            HalfSpace::closed(Vec3::unit_y(), hi),
            HalfSpace::closed(Vec3::unit_z(), hi),
        ]
    }
}

/// One robot with everything it owns.
#[derive(Debug, Clone)]
pub struct Agent {
    pub state: RobotState<f64>,
    pub rules: RuleState<f64>,
    pub grid: OccupancyGrid,
    pub goal: Vec3<f64>,
    pub delta: f64,
    pub fov: FovSpec<f64>,
    pub path: Option<Path>,
    pub last_replan: Option<f64>,
    pub waypoint: Vec3<f64>,
    pub previous_projection: Option<Vec3<f64>>,
    /// Cell centroid from the last successful tick.
    pub centroid: Option<Vec3<f64>>,
    /// Jerk held until the next control tick.
    pub jerk: Vec3<f64>,
    pub yaw_rate_cmd: f64,
    /// Set on collision; a frozen robot no longer moves.
    pub frozen: bool,
}

impl Agent {
    pub fn new(start: Vec3<f64>, yaw: f64, goal: Vec3<f64>, delta: f64, fov: FovSpec<f64>, grid: OccupancyGrid, beta: f64) -> Self {
        Self {
            state: RobotState::at_rest(start, yaw),
            rules: RuleState::new(beta, goal),
            grid,
            goal,
            delta,
            fov,
            path: None,
            last_replan: None,
            waypoint: goal,
            previous_projection: None,
            centroid: None,
            jerk: Vec3::zero(),
            yaw_rate_cmd: 0.0,
            frozen: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_distance() {
        let c = Obstacle::cylinder(0.0, 0.0, 1.0, 0.0, 2.0);
        assert!((c.distance(&Vec3::new(3.0, 0.0, 1.0)) - 2.0).abs() < 1e-12);
        assert!((c.distance(&Vec3::new(0.0, 0.0, 1.0)) + 1.0).abs() < 1e-12);
        assert!((c.distance(&Vec3::new(4.0, 0.0, 6.0)) - 5.0).abs() < 1e-12);
        assert!((c.distance(&Vec3::new(0.5, 0.0, 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_lie_on_surface() {
        for o in [Obstacle::cylinder(1.0, 2.0, 0.4, 0.0, 3.0), Obstacle::Sphere { center: Vec3::new(0.0, 0.0, 2.0), radius: 0.7 }] {
            let s = o.surface_samples(0.1);
            assert!(s.len() > 100);
            assert!(s.iter().all(|q| o.distance(q).abs() < 1e-9));
        }
    }

    #[test]
    fn blocking_segments() {
        let c = Obstacle::cylinder(0.0, 0.0, 1.0, 0.0, 2.0);
        assert!(c.blocks(&Vec3::new(-3.0, 0.0, 1.0), &Vec3::new(3.0, 0.0, 1.0)));
        assert!(!c.blocks(&Vec3::new(-3.0, 0.0, 3.0), &Vec3::new(3.0, 0.0, 3.0)));
        assert!(!c.blocks(&Vec3::new(-3.0, 0.0, 1.0), &Vec3::new(-1.0, 0.0, 1.0)));
    }

    #[test]
    fn slices() {
        let s = Obstacle::Sphere { center: Vec3::new(0.0, 0.0, 1.0), radius: 1.0 };
        assert_eq!(s.slice(1.0), Some(([0.0, 0.0], 1.0)));
        assert!(s.slice(2.5).is_none());
    }
}
