//! 3D geometry: half-spaces, ball-bounded convex regions, sensor fields of
//! view, lattice sampling and exact nearest-point queries.

mod fov;
mod project;
mod region;
mod vec3;

use thiserror::Error;

pub use fov::{FovSpec, SensorFrame};
pub use project::{nearest_in_region, project_ball_polyhedron, project_polyhedron, project_visible};
pub use region::{ConvexRegion, HalfSpace};
pub use vec3::Vec3;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GeomError {
    #[error("no lattice point falls inside the region")]
    EmptySampling,
    #[error("region is empty")]
    EmptyRegion,
    #[error("point lies outside the region")]
    OutsideRegion,
    #[error("resolution must be positive")]
    BadResolution,
}

/// Weighted lattice points covering a region.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSampling<T> {
    pub resolution: T,
    pub points: Vec<Vec3<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GridSampling<T> {
    pub fn from_points(resolution: T, points: Vec<Vec3<T>>) -> Self {
        let weights = vec![T::one(); points.len()];
        Self { resolution, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points (and weights) accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Vec3<T>) -> bool) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (p, w) in self.points.iter().zip(&self.weights) {
            if keep(p) {
                points.push(*p);
                weights.push(*w);
            }
        }
        Self { resolution: self.resolution, points, weights }
    }

    /// The sample closest to `q`; first one wins ties.
    pub fn nearest(&self, q: &Vec3<T>) -> Option<Vec3<T>> {
        let mut best: Option<(T, Vec3<T>)> = None;
        for p in &self.points {
            let d = (*p - *q).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, *p));
            }
        }
        best.map(|(_, p)| p)
    }
}

/// Lattice points of pitch `resolution`, anchored at `region.center`, that lie
/// in the region. Weights start at one.
pub fn discretize<T: Scalar>(region: &ConvexRegion<T>, resolution: T) -> Result<GridSampling<T>, GeomError> {
    discretize_impl(region, resolution, false)
}

/// Like [`discretize`] but restricted to the horizontal lattice layer through
/// the center, for planar operation.
pub fn discretize_layer<T: Scalar>(region: &ConvexRegion<T>, resolution: T) -> Result<GridSampling<T>, GeomError> {
    discretize_impl(region, resolution, true)
}

/// Lattice offsets of a ball of `radius` around the origin. Adding them to a
/// region center and keeping the members reproduces [`discretize`] (or
/// [`discretize_layer`]) for any region of that radius, without re-walking
/// the whole lattice each time.
pub fn ball_stencil<T: Scalar>(radius: T, resolution: T, planar: bool) -> Result<Vec<Vec3<T>>, GeomError> {
    discretize_impl(&ConvexRegion::ball(Vec3::zero(), radius), resolution, planar).map(|s| s.points)
}

/// [`discretize`] over a precomputed [`ball_stencil`] of matching radius.
pub fn discretize_stencil<T: Scalar>(
    region: &ConvexRegion<T>,
    resolution: T,
    stencil: &[Vec3<T>],
) -> Result<GridSampling<T>, GeomError> {
    let points: Vec<_> = stencil
        .iter()
        .map(|o| region.center + *o)
        .filter(|q| region.contains(q))
        .collect();
    if points.is_empty() {
        return Err(GeomError::EmptySampling);
    }
    Ok(GridSampling::from_points(resolution, points))
}

fn discretize_impl<T: Scalar>(
    region: &ConvexRegion<T>,
    resolution: T,
    planar: bool,
) -> Result<GridSampling<T>, GeomError> {
    if !(resolution > T::zero()) {
        return Err(GeomError::BadResolution);
    }
    let steps = (region.radius / resolution).floor().to_i64().unwrap_or(0);
    let r2 = region.radius * region.radius;
    let c = region.center;
    let kz = if planar { 0 } else { steps };
    let mut points = Vec::new();
    for i in -steps..=steps {
        let dx = T::lit(i as f64) * resolution;
        for j in -steps..=steps {
            let dy = T::lit(j as f64) * resolution;
            let dxy = dx * dx + dy * dy;
            if dxy > r2 {
                continue;
            }
            for k in -kz..=kz {
                let dz = T::lit(k as f64) * resolution;
                if dxy + dz * dz > r2 {
                    continue;
                }
                let q = Vec3::new(c.x + dx, c.y + dy, c.z + dz);
                if region.faces.iter().all(|f| f.contains(&q)) && (q - c).norm() <= region.radius {
                    points.push(q);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(GeomError::EmptySampling);
    }
    Ok(GridSampling::from_points(resolution, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec3<f64>;

    #[test]
    fn unit_ball_half_resolution_has_33_points() {
        // brute force: offsets (i,j,k) ∈ [−2,2]³ with i²+j²+k² ≤ 4
        let mut expected = 0;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                for k in -2i32..=2 {
                    if i * i + j * j + k * k <= 4 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(expected, 33);
        let s = discretize(&ConvexRegion::ball(V::zero(), 1.0), 0.5).unwrap();
        assert_eq!(s.len(), 33);
        assert!(s.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn disjoint_face_gives_empty_sampling() {
        let r = ConvexRegion::ball(V::zero(), 5.0)
            .with_faces([HalfSpace::closed(V::unit_x(), V::new(-10.0, 0.0, 0.0))]);
        assert_eq!(discretize(&r, 0.25), Err(GeomError::EmptySampling));
    }

    #[test]
    fn coarse_resolution_keeps_only_center() {
        let c = V::new(1.0, -2.0, 0.5);
        let s = discretize(&ConvexRegion::ball(c, 1.0), 2.5).unwrap();
        assert_eq!(s.points, vec![c]);
    }

    #[test]
    fn bad_resolution() {
        assert_eq!(discretize(&ConvexRegion::ball(V::zero(), 1.0), 0.0), Err(GeomError::BadResolution));
    }

    #[test]
    fn halving_resolution_scales_count_by_eight() {
        let ball = ConvexRegion::ball(V::new(0.3, 0.1, -0.2), 3.0);
        let coarse = discretize(&ball, 0.2).unwrap().len() as f64;
        let fine = discretize(&ball, 0.1).unwrap().len() as f64;
        let ratio = fine / coarse;
        assert!((ratio - 8.0).abs() <= 0.2 * 8.0, "ratio {ratio}");
    }

    #[test]
    fn stencil_matches_direct_discretization() {
        let stencil = ball_stencil(2.0, 0.25, false).unwrap();
        let region = ConvexRegion::ball(V::new(0.5, -1.25, 3.0), 2.0)
            .with_faces([HalfSpace::closed(V::new(1.0, 1.0, 0.3), V::new(1.0, -1.0, 3.0))]);
        let a = discretize(&region, 0.25).unwrap();
        let b = discretize_stencil(&region, 0.25, &stencil).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layer_sampling_is_planar() {
        let s = discretize_layer(&ConvexRegion::ball(V::new(0.0, 0.0, 2.0), 1.0), 0.25).unwrap();
        assert!(s.points.iter().all(|p| p.z == 2.0));
        let expected = (-4i32..=4)
            .flat_map(|i| (-4i32..=4).map(move |j| i * i + j * j))
            .filter(|&r2| r2 <= 16)
            .count();
        assert_eq!(s.len(), expected);
    }
}
