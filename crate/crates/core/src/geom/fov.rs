use serde::{Deserialize, Serialize};

use super::{HalfSpace, Vec3};
use crate::scalar::Scalar;

/// Anisotropic sensor field of view `{f_x, f_z, f_a}` in degrees: horizontal
/// extent, vertical extent and sensor pitch relative to the body frame.
///
/// Membership is a rectangular azimuth × elevation window in the sensor frame,
/// which is the yaw-aligned body frame pitched by `f_a` about its y axis
/// (negative pitch looks down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FovSpec<T> {
    pub f_x: T,
    pub f_z: T,
    pub f_a: T,
}

/// Orthonormal sensor axes in the world frame.
#[derive(Debug, Clone, Copy)]
pub struct SensorFrame<T> {
    pub forward: Vec3<T>,
    pub left: Vec3<T>,
    pub up: Vec3<T>,
}

impl<T: Scalar> SensorFrame<T> {
    pub fn to_sensor(&self, d: &Vec3<T>) -> Vec3<T> {
        Vec3::new(self.forward.dot(d), self.left.dot(d), self.up.dot(d))
    }
}

impl<T: Scalar> FovSpec<T> {
    pub fn new(f_x: T, f_z: T, f_a: T) -> Self {
        Self { f_x, f_z, f_a }
    }

    pub fn from_f64(f_x: f64, f_z: f64, f_a: f64) -> Self {
        Self::new(T::lit(f_x), T::lit(f_z), T::lit(f_a))
    }

    /// Omnidirectional sensing.
    pub fn omni() -> Self {
        Self::from_f64(360.0, 360.0, 0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.f_x > T::zero()
            && self.f_x <= T::lit(360.0)
            && self.f_z >= T::zero()
            && self.f_z <= T::lit(360.0)
            && self.f_a >= T::lit(-90.0)
            && self.f_a <= T::lit(90.0)
    }

    /// A zero vertical extent restricts sensing (and motion) to the horizontal plane.
    pub fn is_planar(&self) -> bool {
        self.f_z == T::zero()
    }

    fn half_az(&self) -> T {
        (self.f_x / T::lit(2.0)).to_radians()
    }

    fn half_el(&self) -> T {
        (self.f_z / T::lit(2.0)).to_radians()
    }

    fn az_unbounded(&self) -> bool {
        self.f_x >= T::lit(360.0)
    }

    fn el_unbounded(&self) -> bool {
        // elevation lives in [−90°, 90°]
        self.f_z >= T::lit(180.0)
    }

    pub fn frame(&self, heading: &Vec3<T>) -> SensorFrame<T> {
        let h = heading
            .horizontal()
            .try_normalize(T::epsilon())
            .unwrap_or_else(Vec3::unit_x);
        let body_left = Vec3::unit_z().cross(&h);
        let (s, c) = self.f_a.to_radians().sin_cos();
        let forward = h * c + Vec3::unit_z() * s;
        let up = h * (-s) + Vec3::unit_z() * c;
        SensorFrame { forward, left: body_left, up }
    }

    /// True iff `q` lies in the sensing window of a robot at `position`
    /// facing `heading`. The robot's own position is always visible.
    pub fn contains(&self, position: &Vec3<T>, heading: &Vec3<T>, q: &Vec3<T>) -> bool {
        let d = *q - *position;
        let norm = d.norm();
        if norm <= T::epsilon() {
            return true;
        }
        let s = self.frame(heading).to_sensor(&d);
        self.contains_sensor(&s, norm)
    }

    pub(crate) fn contains_sensor(&self, s: &Vec3<T>, norm: T) -> bool {
        self.contains_sensor_margin(s, norm, T::zero())
    }

    /// Window test widened by the angular radius `margin` of a ball.
    fn contains_sensor_margin(&self, s: &Vec3<T>, norm: T, margin: T) -> bool {
        let tol = T::boundary_tol();
        let rho = (s.x * s.x + s.y * s.y).sqrt();
        let el = s.z.atan2(rho);
        // On the sensor's vertical axis azimuth is undefined; every azimuth
        // window reaches it in the limit.
        if !self.az_unbounded() && rho > tol * norm {
            let az = s.y.atan2(s.x);
            // a ball's azimuth half-width grows toward the poles
            let widen = margin.sin() / el.cos();
            let az_margin = if widen >= T::one() { T::PI() } else { widen.asin() };
            if az.abs() > self.half_az() + az_margin + tol {
                return false;
            }
        }
        if !self.el_unbounded() && el.abs() > self.half_el() + margin + tol {
            return false;
        }
        true
    }

    /// Whether any part of the ball (`center`, `radius`) falls in the window.
    pub fn sees_ball(&self, position: &Vec3<T>, heading: &Vec3<T>, center: &Vec3<T>, radius: T) -> bool {
        let d = *center - *position;
        let norm = d.norm();
        if norm <= radius {
            return true;
        }
        let s = self.frame(heading).to_sensor(&d);
        self.contains_sensor_margin(&s, norm, (radius / norm).asin())
    }

    /// Half-spaces whose intersection is a convex subset of the field of view
    /// containing both the robot position and `anchor` (which must be visible).
    pub fn convex_inner_faces(
        &self,
        position: &Vec3<T>,
        heading: &Vec3<T>,
        anchor: &Vec3<T>,
    ) -> Vec<HalfSpace<T>> {
        let frame = self.frame(heading);
        let s = frame.to_sensor(&(*anchor - *position));
        let to_world = |v: Vec3<T>| frame.forward * v.x + frame.left * v.y + frame.up * v.z;
        let mut faces = Vec::new();

        if !self.az_unbounded() {
            let half = self.half_az();
            // Boundary rays at ±half; each wedge side is the half-space left/right of its ray.
            let side = |angle: T, keep_ccw: bool| {
                let (sa, ca) = angle.sin_cos();
                // normal perpendicular to the ray (ca, sa) in the sensor xy plane
                let n = if keep_ccw { Vec3::new(sa, -ca, T::zero()) } else { Vec3::new(-sa, ca, T::zero()) };
                HalfSpace::closed(to_world(n), *position)
            };
            if self.f_x <= T::lit(180.0) {
                faces.push(side(half, false));
                faces.push(side(-half, true));
            } else {
                let az = if s.x * s.x + s.y * s.y > T::zero() { s.y.atan2(s.x) } else { T::zero() };
                if az >= T::zero() {
                    faces.push(side(half, false));
                } else {
                    faces.push(side(-half, true));
                }
            }
        }
        if !self.el_unbounded() {
            let t = self.half_el().tan();
            let rho = (s.x * s.x + s.y * s.y).sqrt();
            let (ux, uy) = if rho > T::epsilon() {
                (s.x / rho, s.y / rho)
            } else {
                (T::one(), T::zero())
            };
            // z ≤ t (ux x + uy y)  and  −z ≤ t (ux x + uy y)
            let upper = Vec3::new(-t * ux, -t * uy, T::one());
            let lower = Vec3::new(-t * ux, -t * uy, -T::one());
            faces.push(HalfSpace::closed(to_world(upper), *position));
            faces.push(HalfSpace::closed(to_world(lower), *position));
        }
        faces
    }
}
