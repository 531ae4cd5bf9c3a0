//! Dual active-set solver for minimum-norm quadratic programs:
//!
//! ```text
//! minimize ½‖x‖²  subject to  E x = e,  C x ≥ d
//! ```
//!
//! Goldfarb–Idnani with an identity Hessian. The active-set factorization is
//! rebuilt from scratch at every step, which is affordable for the problem
//! sizes met here (a few hundred variables) and keeps the numerics simple.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy)]
struct Active {
    row: usize,
    equality: bool,
}

struct Problem<'a> {
    eq_a: &'a DMatrix<f64>,
    eq_b: &'a DVector<f64>,
    in_c: &'a DMatrix<f64>,
    in_d: &'a DVector<f64>,
}

impl Problem<'_> {
    fn normal(&self, c: Active) -> DVector<f64> {
        if c.equality {
            self.eq_a.row(c.row).transpose()
        } else {
            self.in_c.row(c.row).transpose()
        }
    }

    fn rhs(&self, c: Active) -> f64 {
        if c.equality {
            self.eq_b[c.row]
        } else {
            self.in_d[c.row]
        }
    }
}

/// Thin QR of the active normals; returns `(Q1, R)` or `None` when empty.
fn factor(p: &Problem, active: &[Active], n: usize) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if active.is_empty() {
        return None;
    }
    let mut nmat = DMatrix::zeros(n, active.len());
    for (j, &c) in active.iter().enumerate() {
        nmat.set_column(j, &p.normal(c));
    }
    let qr = nmat.qr();
    Some((qr.q(), qr.r()))
}

/// `(z, r)`: the part of `normal` outside the active span, and its
/// coordinates in the active normals.
fn directions(
    fac: &Option<(DMatrix<f64>, DMatrix<f64>)>,
    normal: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    match fac {
        None => (normal.clone(), DVector::zeros(0)),
        Some((q, r)) => {
            let proj = q.transpose() * normal;
            let z = normal - q * &proj;
            let coords = r
                .solve_upper_triangular(&proj)
                .unwrap_or_else(|| DVector::zeros(proj.len()));
            (z, coords)
        }
    }
}

/// Solves the QP. `eq_a`/`in_c` hold one constraint per row.
pub fn solve_min_norm(
    eq_a: &DMatrix<f64>,
    eq_b: &DVector<f64>,
    in_c: &DMatrix<f64>,
    in_d: &DVector<f64>,
) -> Result<DVector<f64>, QpError> {
    let n = eq_a.ncols().max(in_c.ncols());
    let p = Problem {
        eq_a,
        eq_b,
        in_c,
        in_d,
    };
    let scale = eq_b.amax().max(in_d.amax()).max(1.0);
    let feas_tol = 1e-11 * scale;
    let dep_tol = 1e-10;

    let mut x = DVector::zeros(n);
    let mut active: Vec<Active> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();

    for row in 0..eq_a.nrows() {
        let c = Active { row, equality: true };
        let normal = p.normal(c);
        let nn = normal.norm();
        let slack = normal.dot(&x) - p.rhs(c);
        let fac = factor(&p, &active, n);
        let (z, r) = directions(&fac, &normal);
        if nn == 0.0 || z.norm() <= dep_tol * nn {
            if slack.abs() > feas_tol * nn.max(1.0) * 1e3 {
                return Err(QpError::Infeasible);
            }
            continue;
        }
        let t = -slack / z.dot(&normal);
        x += &z * t;
        for (u, ri) in mult.iter_mut().zip(r.iter()) {
            *u -= t * ri;
        }
        mult.push(t);
        active.push(c);
    }

    let max_iter = 50 * (in_c.nrows() + eq_a.nrows() + 10);
    let mut iter = 0;
    loop {
        // most violated inequality, by normalized slack
        let mut pick: Option<(usize, f64)> = None;
        for row in 0..in_c.nrows() {
            if active.iter().any(|a| !a.equality && a.row == row) {
                continue;
            }
            let nr = in_c.row(row).norm();
            if nr == 0.0 {
                if in_d[row] > feas_tol {
                    return Err(QpError::Infeasible);
                }
                continue;
            }
            let s = (in_c.row(row).dot(&x.transpose()) - in_d[row]) / nr;
            if s < -feas_tol && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((row, s));
            }
        }
        let Some((row, _)) = pick else {
            break;
        };
        let cand = Active { row, equality: false };
        let normal = p.normal(cand);
        let mut cand_mult = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(QpError::IterationLimit);
            }
            let fac = factor(&p, &active, n);
            let (z, r) = directions(&fac, &normal);
            // partial step: largest t keeping active inequality multipliers ≥ 0
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, c) in active.iter().enumerate() {
                if !c.equality && r[j] > 0.0 {
                    let t = mult[j] / r[j];
                    if t < t1 {
                        t1 = t;
                        drop = Some(j);
                    }
                }
            }
            let slack = normal.dot(&x) - p.rhs(cand);
            let zn = z.dot(&normal);
            let t2 = if z.norm() > dep_tol * normal.norm() {
                -slack / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            for (u, ri) in mult.iter_mut().zip(r.iter()) {
                *u -= t * ri;
            }
            cand_mult += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                active.push(cand);
                mult.push(cand_mult);
                break;
            }
            let j = drop.expect("partial step has a blocking constraint");
            active.remove(j);
            mult.remove(j);
        }
    }

    // polish: exact minimum-norm point of the final active set
    if let Some((q, r)) = factor(&p, &active, n) {
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&c| p.rhs(c)));
        if let Some(w) = r.transpose().solve_lower_triangular(&rhs) {
            let polished = q * w;
            if polished.iter().all(|v| v.is_finite()) {
                x = polished;
            }
        }
    } else {
        x.fill(0.0);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_only_is_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let c = DMatrix::zeros(0, 2);
        let d = DVector::zeros(0);
        let x = solve_min_norm(&a, &b, &c, &d).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_becomes_active() {
        // x0 + x1 = 2, x0 ≥ 1.5
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = DVector::from_vec(vec![1.5]);
        let x = solve_min_norm(&a, &b, &c, &d).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        // x0 = 1, x0 ≥ 2
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let c = DMatrix::from_row_slice(1, 1, &[1.0]);
        let d = DVector::from_vec(vec![2.0]);
        assert_eq!(solve_min_norm(&a, &b, &c, &d), Err(QpError::Infeasible));
    }

    #[test]
    fn dependent_equalities() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let c = DMatrix::zeros(0, 2);
        let d = DVector::zeros(0);
        let x = solve_min_norm(&a, &b, &c, &d).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        let bad = DVector::from_vec(vec![1.0, 3.0]);
        assert_eq!(solve_min_norm(&a, &bad, &c, &d), Err(QpError::Infeasible));
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            // min ½‖x‖² s.t. x ≥ lo (box below); closed form x = max(lo, 0)
            let n = 6;
            let lo = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let c = DMatrix::identity(n, n);
            let x = solve_min_norm(&DMatrix::zeros(0, n), &DVector::zeros(0), &c, &lo).unwrap();
            for i in 0..n {
                assert!((x[i] - lo[i].max(0.0)).abs() < 1e-12);
            }
        }
    }
}
