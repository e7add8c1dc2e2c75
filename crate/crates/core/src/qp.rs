//! Dense strictly convex QP with inequality constraints, solved by the dual
//! active-set method of Goldfarb and Idnani.
//!
//! minimize ½ xᵀHx + gᵀx  subject to  C x ≤ d
//!
//! The dual method starts from the unconstrained minimizer and adds violated
//! constraints one at a time, so every constraint it reports as satisfied is
//! satisfied to rounding. Problems here are tiny (3 variables for projections,
//! one horizon of jerks per axis for the controller), so the active-set Gram
//! system is refactored from scratch on every step.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("active-set iteration limit reached")]
    IterationLimit,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    /// Indices of constraints active at the solution.
    pub active: Vec<usize>,
    /// Lagrange multipliers, aligned with `active`.
    pub multipliers: Vec<T>,
    pub iterations: usize,
}

/// Lower-triangular Cholesky factor of a row-major `n × n` SPD matrix.
pub(crate) fn cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place.
pub(crate) fn forward_sub<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub(crate) fn backward_sub_t<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves the QP. `hessian` is row-major `n × n`; `None` means identity.
/// `rows` is row-major `m × n`. `tol` is the accepted constraint violation,
/// measured as signed distance in the whitened variables.
pub fn solve<T: Scalar>(
    n: usize,
    hessian: Option<&[T]>,
    gradient: &[T],
    rows: &[T],
    rhs: &[T],
    tol: T,
) -> Result<QpSolution<T>, QpError> {
    let m = rhs.len();
    if gradient.len() != n {
        return Err(QpError::Dimension("gradient"));
    }
    if rows.len() != m * n {
        return Err(QpError::Dimension("constraint rows"));
    }

    // Whitening y = Lᵀx turns the Hessian into the identity.
    let chol = match hessian {
        Some(h) => {
            if h.len() != n * n {
                return Err(QpError::Dimension("hessian"));
            }
            Some(cholesky(h, n).ok_or(QpError::NotPositiveDefinite)?)
        }
        None => None,
    };
    let whiten = |v: &mut [T]| {
        if let Some(l) = &chol {
            forward_sub(l, n, v);
        }
    };

    let mut normals: Vec<T> = rows.to_vec();
    let mut norms = Vec::with_capacity(m);
    for i in 0..m {
        let row = &mut normals[i * n..(i + 1) * n];
        whiten(row);
        norms.push(dot(row, row).sqrt());
    }
    let mut y: Vec<T> = gradient.to_vec();
    whiten(&mut y);
    for v in &mut y {
        *v = -*v;
    }

    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<T> = Vec::new();
    let max_iter = 50 * (m + n) + 100;
    let mut iterations = 0;
    let tiny = T::epsilon() * T::lit(100.0);

    loop {
        // Most violated constraint, normalized.
        let mut worst: Option<(usize, T)> = None;
        for i in 0..m {
            if active.contains(&i) || norms[i] <= tiny {
                if norms[i] <= tiny && rhs[i] < -tol {
                    return Err(QpError::Infeasible);
                }
                continue;
            }
            let row = &normals[i * n..(i + 1) * n];
            let viol = (dot(row, &y) - rhs[i]) / norms[i];
            if viol > tol && worst.is_none_or(|(_, w)| viol > w) {
                worst = Some((i, viol));
            }
        }
        let Some((p, _)) = worst else {
            break;
        };
        let np: Vec<T> = normals[p * n..(p + 1) * n].to_vec();
        let mut up = T::zero();

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            // r = (NᵀN)⁻¹ Nᵀ n_p ; z = n_p − N r
            let q = active.len();
            let mut r = vec![T::zero(); q];
            let mut z = np.clone();
            if q > 0 {
                let mut gram = vec![T::zero(); q * q];
                let mut rhs_g = vec![T::zero(); q];
                for a in 0..q {
                    let ra = &normals[active[a] * n..(active[a] + 1) * n];
                    rhs_g[a] = dot(ra, &np);
                    for b in 0..=a {
                        let rb = &normals[active[b] * n..(active[b] + 1) * n];
                        let v = dot(ra, rb);
                        gram[a * q + b] = v;
                        gram[b * q + a] = v;
                    }
                }
                // The active normals stay independent by construction; a failing
                // factorization means they have become numerically dependent.
                let lg = cholesky(&gram, q).ok_or(QpError::Infeasible)?;
                forward_sub(&lg, q, &mut rhs_g);
                backward_sub_t(&lg, q, &mut rhs_g);
                r = rhs_g;
                for (a, &idx) in active.iter().enumerate() {
                    let ra = &normals[idx * n..(idx + 1) * n];
                    for k in 0..n {
                        z[k] -= ra[k] * r[a];
                    }
                }
            }
            let zz = dot(&z, &z);
            let np_norm2 = dot(&np, &np);

            // Partial (dual) step limit.
            let mut t1: Option<(T, usize)> = None;
            for (a, &ra) in r.iter().enumerate() {
                if ra > T::zero() {
                    let t = mult[a] / ra;
                    if t1.is_none_or(|(best, _)| t < best) {
                        t1 = Some((t, a));
                    }
                }
            }
            // Full (primal) step.
            let t2 = if zz > tiny * np_norm2 {
                Some((dot(&np, &y) - rhs[p]) / zz)
            } else {
                None
            };

            match (t1, t2) {
                (None, None) => return Err(QpError::Infeasible),
                (Some((t, k)), None) => {
                    for (a, ra) in r.iter().enumerate() {
                        mult[a] -= t * *ra;
                    }
                    up += t;
                    active.remove(k);
                    mult.remove(k);
                }
                (t1, Some(t2)) => {
                    let (t, drop) = match t1 {
                        Some((t1v, k)) if t1v < t2 => (t1v, Some(k)),
                        _ => (t2, None),
                    };
                    for k in 0..n {
                        y[k] -= t * z[k];
                    }
                    for (a, ra) in r.iter().enumerate() {
                        mult[a] -= t * *ra;
                    }
                    up += t;
                    match drop {
                        Some(k) => {
                            active.remove(k);
                            mult.remove(k);
                        }
                        None => {
                            active.push(p);
                            mult.push(up);
                            break;
                        }
                    }
                }
            }
        }
    }

    // Back to the original variables.
    if let Some(l) = &chol {
        backward_sub_t(l, n, &mut y);
    }
    Ok(QpSolution { x: y, active, multipliers: mult, iterations })
}
