use super::{ConvexRegion, FovSpec, GeomError, GridSampling, HalfSpace, Vec3};
use crate::qp;
use crate::scalar::Scalar;

fn solver_tol<T: Scalar>(scale: T) -> T {
    T::epsilon() * T::lit(1e4) * scale.max(T::one())
}

/// Euclidean projection of `z` onto the closed polyhedron `⋂ faces`.
/// Strict faces are treated as their closure.
pub fn project_polyhedron<T: Scalar>(faces: &[HalfSpace<T>], z: &Vec3<T>) -> Result<Vec3<T>, GeomError> {
    if faces.iter().all(|f| f.value(z) <= T::zero()) {
        return Ok(*z);
    }
    let mut rows = Vec::with_capacity(faces.len() * 3);
    let mut rhs = Vec::with_capacity(faces.len());
    let mut scale = z.norm();
    for f in faces {
        let n = f.normal / f.normal.norm();
        rows.extend_from_slice(&[n.x, n.y, n.z]);
        let b = n.dot(&f.point);
        scale = scale.max(b.abs());
        rhs.push(b);
    }
    let g = [-z.x, -z.y, -z.z];
    match qp::solve(3, None, &g, &rows, &rhs, solver_tol(scale)) {
        Ok(sol) => Ok(Vec3::new(sol.x[0], sol.x[1], sol.x[2])),
        Err(_) => Err(GeomError::EmptyRegion),
    }
}

/// Exact projection onto `ball(center, radius) ∩ ⋂ faces`.
///
/// With the ball constraint priced by a multiplier λ ≥ 0 the problem reduces
/// to projecting `(q + λ c) / (1 + λ)` onto the polyhedron; the distance of
/// that projection from the center is non-increasing in λ, so λ is found by
/// bisection.
pub fn project_ball_polyhedron<T: Scalar>(
    center: &Vec3<T>,
    radius: T,
    faces: &[HalfSpace<T>],
    q: &Vec3<T>,
) -> Result<Vec3<T>, GeomError> {
    let inside_ball = |y: &Vec3<T>| (*y - *center).norm() <= radius;
    let y0 = project_polyhedron(faces, q)?;
    if inside_ball(&y0) {
        return Ok(y0);
    }
    let shifted = |lambda: T| (*q + *center * lambda) / (T::one() + lambda);
    let y_inf = project_polyhedron(faces, center)?;
    if (y_inf - *center).norm() > radius * (T::one() + T::boundary_tol()) {
        return Err(GeomError::EmptyRegion);
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut y_hi = project_polyhedron(faces, &shifted(hi))?;
    let mut doublings = 0;
    while !inside_ball(&y_hi) {
        lo = hi;
        hi *= T::lit(4.0);
        doublings += 1;
        if doublings > 60 {
            // tangent case: the ball touches the polyhedron only at y_inf
            return Ok(y_inf);
        }
        y_hi = project_polyhedron(faces, &shifted(hi))?;
    }
    let rel = T::epsilon() * T::lit(16.0);
    for _ in 0..200 {
        if hi - lo <= rel * hi {
            break;
        }
        let mid = lo + (hi - lo) / T::lit(2.0);
        let y = project_polyhedron(faces, &shifted(mid))?;
        if inside_ball(&y) {
            hi = mid;
            y_hi = y;
            if (y - *center).norm() >= radius * (T::one() - rel) {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(y_hi)
}

/// Nearest point of `region` to `q`.
///
/// Returns `q` itself when it is inside; otherwise the exact projection, with
/// the nearest sample as a fallback should the solver ever disagree with the
/// sampling (it is also used to reject a numerically bad solve).
pub fn nearest_in_region<T: Scalar>(
    region: &ConvexRegion<T>,
    q: &Vec3<T>,
    sampling: &GridSampling<T>,
) -> Result<Vec3<T>, GeomError> {
    if region.contains(q) {
        return Ok(*q);
    }
    let tol = T::lit(1e-9) * region.radius;
    let fallback = sampling.nearest(q);
    match project_ball_polyhedron(&region.center, region.radius, &region.faces, q) {
        Ok(y) if region.contains_tol(&y, tol) => {
            if let Some(s) = fallback {
                if (s - *q).norm() + tol < (y - *q).norm() {
                    return Ok(s);
                }
            }
            Ok(y)
        }
        _ => fallback.ok_or(GeomError::EmptyRegion),
    }
}

/// Nearest point to `q` in the visible part of `region` (region ∩ field of view).
///
/// The field of view is not convex in general. The search is done over a
/// convex subset of it that contains the visible sample nearest to `q`, so the
/// answer is visible, inside the region, and never farther than that sample.
pub fn project_visible<T: Scalar>(
    region: &ConvexRegion<T>,
    fov: &FovSpec<T>,
    position: &Vec3<T>,
    heading: &Vec3<T>,
    q: &Vec3<T>,
    visible_samples: &GridSampling<T>,
) -> Result<Vec3<T>, GeomError> {
    if region.contains(q) && fov.contains(position, heading, q) {
        return Ok(*q);
    }
    let anchor = visible_samples.nearest(q).ok_or(GeomError::EmptySampling)?;
    let mut faces = region.faces.clone();
    faces.extend(fov.convex_inner_faces(position, heading, &anchor));
    let tol = T::lit(1e-9) * region.radius;
    match project_ball_polyhedron(&region.center, region.radius, &faces, q) {
        Ok(y) if region.contains_tol(&y, tol) && (y - *q).norm() <= (anchor - *q).norm() + tol => Ok(y),
        _ => Ok(anchor),
    }
}
