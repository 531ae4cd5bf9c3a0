//! Static equilibrium of rigid bodies in point contact.
//!
//! Unknowns are the contact forces in each contact's local frame
//! `(f_u, f_v, f_n)`, stacked contact by contact. Every non-fixed body
//! contributes six rows (force and torque balance about the world origin).

use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

use crate::geometry::mesh::tangent_frame;
use crate::geometry::{skew, Vec3};
use crate::qp::{self, QpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaticsError {
    #[error("object {0} has no contacts")]
    Unsupported(usize),
    #[error("no equilibrium solution (residual {residual:.3e} N)")]
    NoEquilibrium { residual: f64 },
    #[error("friction and non-tension constraints are infeasible")]
    Infeasible,
    #[error("QP solver did not converge")]
    SolverFailure,
}

/// Rigid body as seen by the statics: mass, world centre of mass and whether
/// it is immovable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub mass: f64,
    pub com: Vec3,
    pub fixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub position: Vec3,
    /// Unit normal pointing from the supporting body into the supported body.
    pub normal: Vec3,
    pub tangent_u: Vec3,
    pub tangent_v: Vec3,
    pub mu: f64,
    pub supporting: usize,
    pub supported: usize,
}

impl ContactPoint {
    pub fn new(position: Vec3, normal: Vec3, mu: f64, supporting: usize, supported: usize) -> Self {
        let normal = normal.normalize();
        let (tangent_u, tangent_v) = tangent_frame(&normal);
        Self {
            position,
            normal,
            tangent_u,
            tangent_v,
            mu,
            supporting,
            supported,
        }
    }

    /// Columns `(û, v̂, n̂)`.
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.tangent_u, self.tangent_v, self.normal])
    }

    /// World vector expressed as `(u, v, n)` components.
    pub fn to_local(&self, w: &Vec3) -> Vec3 {
        Vec3::new(w.dot(&self.tangent_u), w.dot(&self.tangent_v), w.dot(&self.normal))
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Row block (first row index) of every body, `None` for fixed bodies.
    pub body_rows: Vec<Option<usize>>,
    pub contacts: Vec<ContactPoint>,
    pub total_weight: f64,
}

#[derive(Debug, Clone)]
pub struct ForceSolution {
    /// World-frame force on the supported body at each contact.
    pub forces: Vec<Vec3>,
    /// Same forces as `(f_u, f_v, f_n)`.
    pub local: Vec<Vec3>,
    pub residual: f64,
    pub max_tension: f64,
    pub friction_violation: f64,
}

impl ForceSolution {
    fn from_vector(sys: &EquilibriumSystem, f: &DVector<f64>) -> Self {
        let residual = (&sys.a * f - &sys.b).norm();
        let mut forces = Vec::with_capacity(sys.contacts.len());
        let mut local = Vec::with_capacity(sys.contacts.len());
        let mut max_tension: f64 = 0.0;
        let mut friction_violation: f64 = 0.0;
        for (i, c) in sys.contacts.iter().enumerate() {
            let l = Vec3::new(f[3 * i], f[3 * i + 1], f[3 * i + 2]);
            forces.push(c.frame() * l);
            max_tension = max_tension.max(-l.z);
            friction_violation = friction_violation.max(l.x.abs() + l.y.abs() - c.mu * l.z);
            local.push(l);
        }
        ForceSolution {
            forces,
            local,
            residual,
            max_tension: max_tension.max(0.0),
            friction_violation: friction_violation.max(0.0),
        }
    }

    pub fn objective(&self) -> f64 {
        0.5 * self.local.iter().map(|l| l.norm_squared()).sum::<f64>()
    }
}

pub fn build_equilibrium_system(
    bodies: &[Body],
    contacts: &[ContactPoint],
    gravity: &Vec3,
) -> Result<EquilibriumSystem, StaticsError> {
    let mut body_rows = vec![None; bodies.len()];
    let mut rows = 0;
    for (i, b) in bodies.iter().enumerate() {
        if !b.fixed {
            body_rows[i] = Some(rows);
            rows += 6;
        }
    }
    let mut touched = vec![false; bodies.len()];
    for c in contacts {
        touched[c.supported] = true;
        touched[c.supporting] = true;
    }
    if let Some(i) = (0..bodies.len()).find(|&i| !bodies[i].fixed && !touched[i]) {
        return Err(StaticsError::Unsupported(i));
    }
    let mut a = DMatrix::zeros(rows, 3 * contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        let frame = c.frame();
        let torque = skew(&c.position) * frame;
        for (body, sign) in [(c.supported, 1.0), (c.supporting, -1.0)] {
            if let Some(r) = body_rows[body] {
                a.fixed_view_mut::<3, 3>(r, 3 * i).copy_from(&(frame * sign));
                a.fixed_view_mut::<3, 3>(r + 3, 3 * i).copy_from(&(torque * sign));
            }
        }
    }
    let mut b = DVector::zeros(rows);
    let mut total_weight = 0.0;
    for (i, body) in bodies.iter().enumerate() {
        if let Some(r) = body_rows[i] {
            let w = gravity * body.mass;
            b.fixed_rows_mut::<3>(r).copy_from(&(-w));
            b.fixed_rows_mut::<3>(r + 3).copy_from(&(-body.com.cross(&w)));
            total_weight += w.norm();
        }
    }
    Ok(EquilibriumSystem {
        a,
        b,
        body_rows,
        contacts: contacts.to_vec(),
        total_weight,
    })
}

/// Minimum-norm solution of `A f = b`, ignoring friction and non-tension.
///
/// Uses a QR factorization of `Aᵀ` when `A` has full row rank and a
/// pseudo-inverse otherwise. Inconsistent systems (residual above
/// 1e-6 × total weight) yield [`StaticsError::NoEquilibrium`].
pub fn solve_reaction_forces_qr(sys: &EquilibriumSystem) -> Result<ForceSolution, StaticsError> {
    let (rows, cols) = sys.a.shape();
    if rows == 0 {
        return Ok(ForceSolution::from_vector(sys, &DVector::zeros(cols)));
    }
    let mut f = None;
    if cols >= rows {
        let qr = sys.a.transpose().qr();
        let r = qr.r();
        let diag_max = r.diagonal().amax();
        let full_rank = r.diagonal().iter().all(|d| d.abs() > 1e-10 * diag_max.max(1e-300));
        if full_rank {
            if let Some(z) = r.transpose().solve_lower_triangular(&sys.b) {
                f = Some(qr.q() * z);
            }
        }
    }
    let f = match f {
        Some(f) => f,
        None => {
            let svd = sys.a.clone().svd(true, true);
            let smax = svd.singular_values.amax();
            svd.solve(&sys.b, 1e-10 * smax.max(1e-300))
                .expect("svd with both factors solves")
        }
    };
    let sol = ForceSolution::from_vector(sys, &f);
    if sol.residual > 1e-6 * sys.total_weight.max(1e-12) {
        return Err(StaticsError::NoEquilibrium {
            residual: sol.residual,
        });
    }
    Ok(sol)
}

/// Friction-constrained minimum-norm forces: `f_n ≥ 0` and the four-facet
/// pyramid `|f_u| + |f_v| ≤ μ f_n` at every contact.
pub fn solve_reaction_forces_qp(sys: &EquilibriumSystem) -> Result<ForceSolution, StaticsError> {
    let n = 3 * sys.contacts.len();
    let mut c = DMatrix::zeros(5 * sys.contacts.len(), n);
    for (i, contact) in sys.contacts.iter().enumerate() {
        c[(5 * i, 3 * i + 2)] = 1.0;
        for (k, (su, sv)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .into_iter()
            .enumerate()
        {
            let row = 5 * i + 1 + k;
            c[(row, 3 * i)] = -su;
            c[(row, 3 * i + 1)] = -sv;
            c[(row, 3 * i + 2)] = contact.mu;
        }
    }
    let d = DVector::zeros(c.nrows());
    match qp::solve_min_norm(&sys.a, &sys.b, &c, &d) {
        Ok(f) => Ok(ForceSolution::from_vector(sys, &f)),
        Err(QpError::Infeasible) => Err(StaticsError::Infeasible),
        Err(QpError::IterationLimit) => Err(StaticsError::SolverFailure),
    }
}

pub fn max_tension(sol: &ForceSolution) -> f64 {
    sol.max_tension
}

pub fn check_equilibrium(sol: &ForceSolution, tol: f64) -> bool {
    sol.residual <= tol && sol.max_tension <= tol && sol.friction_violation <= tol
}
