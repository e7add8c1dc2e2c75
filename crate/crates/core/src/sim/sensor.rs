use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{push_circle, Obstacle};
use crate::cwvd::RobotDisk;
use crate::geom::{FovSpec, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub range: f64,
    /// Spacing of the pre-sampled obstacle surfaces.
    pub spacing: f64,
    /// Standard deviation of the noise added to observed neighbor positions.
    pub sigma_obs: f64,
    pub occlusion: bool,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { range: 5.0, spacing: 0.1, sigma_obs: 0.0, occlusion: false }
    }
}

/// What one robot sees at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSnapshot {
    pub cloud: Vec<Vec3<f64>>,
    pub neighbors: Vec<RobotDisk<f64>>,
    pub time: f64,
}

/// Where a robot is and how it looks around, frozen for a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3<f64>,
    pub heading: Vec3<f64>,
    pub radius: f64,
    pub fov: FovSpec<f64>,
}

/// Obstacles with their surfaces sampled once up front.
#[derive(Debug, Clone)]
pub struct SampledObstacles {
    pub obstacles: Vec<Obstacle>,
    surfaces: Vec<Vec<Vec3<f64>>>,
    spacing: f64,
}

impl SampledObstacles {
    pub fn new(obstacles: Vec<Obstacle>, spacing: f64) -> Self {
        let surfaces = obstacles.iter().map(|o| o.surface_samples(spacing)).collect();
        Self { obstacles, surfaces, spacing }
    }

    pub fn surface(&self, k: usize) -> &[Vec3<f64>] {
        &self.surfaces[k]
    }

    /// Signed distance to the nearest obstacle surface, `None` with no obstacles.
    pub fn distance(&self, p: &Vec3<f64>) -> Option<f64> {
        self.obstacles.iter().map(|o| o.distance(p)).min_by(f64::total_cmp)
    }

    fn occluded(&self, from: &Vec3<f64>, q: &Vec3<f64>, owner: usize) -> bool {
        let own = &self.obstacles[owner];
        if own.normal_at(q).dot(&(*from - *q)) <= 0.0 {
            return true;
        }
        self.obstacles.iter().enumerate().any(|(k, o)| k != owner && o.blocks(from, q))
    }

    fn candidates(&self, k: usize, pose: &Pose, range: f64) -> Vec<Vec3<f64>> {
        let o = &self.obstacles[k];
        if pose.fov.is_planar() {
            // a level sensor only sees the cross-section at its own height
            let mut ring = Vec::new();
            if let Some((c, r)) = o.slice(pose.position.z) {
                let n = ((2.0 * std::f64::consts::PI * r / self.spacing).ceil() as usize).max(3);
                push_circle(&mut ring, c, r, pose.position.z, n);
            }
            ring
        } else {
            let r2 = range * range;
            self.surfaces[k].iter().filter(|q| (**q - pose.position).norm_squared() <= r2).copied().collect()
        }
    }
}

fn mix(seed: u64, agent: usize, tick: u64) -> u64 {
    // splitmix-style scrambling so neighboring streams are unrelated
    let mut z = seed ^ (agent as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tick.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Obstacle points and neighbors visible to robot `me`. Pure in its inputs:
/// the noise stream is keyed on `(seed, me, tick)`.
pub fn sense(
    obstacles: &SampledObstacles,
    poses: &[Pose],
    me: usize,
    model: &SensorModel,
    seed: u64,
    tick: u64,
    time: f64,
) -> SensorSnapshot {
    let pose = &poses[me];
    let p = pose.position;
    // the view must cover everything our own body could sweep into, so points
    // are tested as balls of our radius and neighbors as their body grown by it
    let visible = |q: &Vec3<f64>| (*q - p).norm() <= model.range && pose.fov.sees_ball(&p, &pose.heading, q, pose.radius);

    let mut cloud = Vec::new();
    for (k, o) in obstacles.obstacles.iter().enumerate() {
        let (c, r) = o.bounding_sphere();
        if (c - p).norm() - r > model.range {
            continue;
        }
        for q in obstacles.candidates(k, pose, model.range) {
            if visible(&q) && !(model.occlusion && obstacles.occluded(&p, &q, k)) {
                cloud.push(q);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, me, tick));
    let noise = (model.sigma_obs > 0.0).then(|| Normal::new(0.0, model.sigma_obs).expect("finite sigma"));
    let mut neighbors = Vec::new();
    for (j, other) in poses.iter().enumerate() {
        let d = (other.position - p).norm();
        let reach = other.radius + pose.radius;
        if j == me || d - other.radius > model.range || !pose.fov.sees_ball(&p, &pose.heading, &other.position, reach) {
            continue;
        }
        let mut seen = other.position;
        if let Some(n) = &noise {
            seen.x += n.sample(&mut rng);
            seen.y += n.sample(&mut rng);
            if !pose.fov.is_planar() {
                seen.z += n.sample(&mut rng);
            }
        }
        neighbors.push(RobotDisk::new(seen, other.radius));
    }
    SensorSnapshot { cloud, neighbors, time }
}
