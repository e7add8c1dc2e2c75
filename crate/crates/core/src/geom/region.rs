use serde::{Deserialize, Serialize};

use super::{GeomError, Vec3};
use crate::scalar::Scalar;

/// `{ q : normal · (q − point) ≤ 0 }`, or `< 0` when `strict`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct HalfSpace<T> {
    pub normal: Vec3<T>,
    pub point: Vec3<T>,
    pub strict: bool,
}

impl<T: Scalar> HalfSpace<T> {
    pub fn closed(normal: Vec3<T>, point: Vec3<T>) -> Self {
        debug_assert!(normal.norm() > T::zero());
        Self { normal, point, strict: false }
    }

    pub fn open(normal: Vec3<T>, point: Vec3<T>) -> Self {
        debug_assert!(normal.norm() > T::zero());
        Self { normal, point, strict: true }
    }

    /// `normal · (q − point)`; non-positive inside.
    #[inline]
    pub fn value(&self, q: &Vec3<T>) -> T {
        self.normal.dot(&(*q - self.point))
    }

    #[inline]
    pub fn contains(&self, q: &Vec3<T>) -> bool {
        let v = self.value(q);
        if self.strict {
            v < T::zero()
        } else {
            v <= T::zero()
        }
    }

    /// Membership of the closure, allowing `tol` meters of violation.
    #[inline]
    pub fn contains_tol(&self, q: &Vec3<T>, tol: T) -> bool {
        self.signed_distance(q) <= tol
    }

    /// Signed distance to the bounding plane, negative inside.
    #[inline]
    pub fn signed_distance(&self, q: &Vec3<T>) -> T {
        self.value(q) / self.normal.norm()
    }

    /// Right-hand side `b` of the form `normal · q ≤ b`.
    #[inline]
    pub fn offset(&self) -> T {
        self.normal.dot(&self.point)
    }
}

/// Intersection of a closed ball around `center` with a list of half-spaces.
/// Always bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ConvexRegion<T> {
    pub center: Vec3<T>,
    pub radius: T,
    pub faces: Vec<HalfSpace<T>>,
}

impl<T: Scalar> ConvexRegion<T> {
    pub fn ball(center: Vec3<T>, radius: T) -> Self {
        Self { center, radius, faces: Vec::new() }
    }

    pub fn with_faces(mut self, faces: impl IntoIterator<Item = HalfSpace<T>>) -> Self {
        self.faces.extend(faces);
        self
    }

    pub fn contains(&self, q: &Vec3<T>) -> bool {
        (*q - self.center).norm() <= self.radius && self.faces.iter().all(|f| f.contains(q))
    }

    /// Closure membership with `tol` meters of slack on every constraint.
    pub fn contains_tol(&self, q: &Vec3<T>, tol: T) -> bool {
        (*q - self.center).norm() <= self.radius + tol
            && self.faces.iter().all(|f| f.contains_tol(q, tol))
    }

    /// Distance from an interior point to the region boundary.
    pub fn distance_to_boundary(&self, q: &Vec3<T>) -> Result<T, GeomError> {
        if !self.contains(q) {
            return Err(GeomError::OutsideRegion);
        }
        Ok(self.clearance(q))
    }

    /// Same as [`Self::distance_to_boundary`] without the membership check;
    /// negative values mean a constraint is violated.
    pub fn clearance(&self, q: &Vec3<T>) -> T {
        let ball = self.radius - (*q - self.center).norm();
        self.faces
            .iter()
            .map(|f| -f.signed_distance(q))
            .fold(ball, |acc, d| if d < acc { d } else { acc })
    }
}
