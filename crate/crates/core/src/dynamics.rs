//! Rigid-body dynamics of the floating-base biped.
//!
//! Equations of motion are `M(q) q̈ + H(q, q̇) = B u + Jᵀ λ + J_pᵀ f_ext`,
//! with each flat sole in contact contributing three bilateral rows: ankle
//! x, ankle z and foot angle. `λ` per sole is therefore a tangential force,
//! a normal force and a moment about the ankle.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::kinematics::Pose;
use crate::linalg::{dot, norm, pinv_solve_psd, Cholesky, Mat};
use crate::model::{RobotModel, Side, NLINKS, NQ, NU};

/// Relative eigenvalue cutoff of the constraint-space inertia.
const RANK_TOL: f64 = 1e-12;
/// Pivot-ratio limit beyond which the Cholesky path hands over to the
/// rank-revealing solve.
const CHOL_COND_LIMIT: f64 = 1e10;
/// Largest tolerated constraint residual before the system counts as singular.
const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedState {
    pub q: [f64; NQ],
    pub qd: [f64; NQ],
}

impl GeneralizedState {
    pub fn new(q: [f64; NQ], qd: [f64; NQ]) -> Self {
        Self { q, qd }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qd).all(|x| x.is_finite())
    }

    pub fn joints(&self) -> [f64; NU] {
        let mut out = [0.0; NU];
        out.copy_from_slice(&self.q[3..]);
        out
    }

    pub fn joint_rates(&self) -> [f64; NU] {
        let mut out = [0.0; NU];
        out.copy_from_slice(&self.qd[3..]);
        out
    }
}

/// Soles held flat on the ground. Rows are stacked left before right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContactSet {
    pub left: bool,
    pub right: bool,
}

impl ContactSet {
    pub const NONE: ContactSet = ContactSet {
        left: false,
        right: false,
    };
    pub const LEFT: ContactSet = ContactSet {
        left: true,
        right: false,
    };
    pub const RIGHT: ContactSet = ContactSet {
        left: false,
        right: true,
    };
    pub const BOTH: ContactSet = ContactSet {
        left: true,
        right: true,
    };

    pub fn single(side: Side) -> Self {
        match side {
            Side::Left => Self::LEFT,
            Side::Right => Self::RIGHT,
        }
    }

    pub fn contains(&self, side: Side) -> bool {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn len(&self) -> usize {
        self.left as usize + self.right as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Soles in row order.
    pub fn sides(&self) -> impl Iterator<Item = Side> + '_ {
        [Side::Left, Side::Right]
            .into_iter()
            .filter(move |s| self.contains(*s))
    }
}

/// Contact force (or impulse) on one sole, expressed at the ankle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoleWrench {
    pub tangential: f64,
    pub normal: f64,
    /// Moment about the ankle, counter-clockwise positive.
    pub moment: f64,
}

impl SoleWrench {
    /// Centre of pressure ahead of the ankle for a flat sole `ankle_height`
    /// below it. Infinite when the normal force vanishes.
    pub fn center_of_pressure(&self, ankle_height: f64) -> f64 {
        (self.moment - ankle_height * self.tangential) / self.normal
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub left: Option<SoleWrench>,
    pub right: Option<SoleWrench>,
}

impl Wrench {
    fn from_multipliers(contacts: ContactSet, lambda: &[f64]) -> Self {
        let mut w = Wrench::default();
        for (k, side) in contacts.sides().enumerate() {
            let sw = SoleWrench {
                tangential: lambda[3 * k],
                normal: lambda[3 * k + 1],
                moment: lambda[3 * k + 2],
            };
            match side {
                Side::Left => w.left = Some(sw),
                Side::Right => w.right = Some(sw),
            }
        }
        w
    }

    pub fn get(&self, side: Side) -> Option<SoleWrench> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn total_normal(&self) -> f64 {
        self.left.map_or(0.0, |w| w.normal) + self.right.map_or(0.0, |w| w.normal)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("contact set is empty; use the unconstrained path")]
    EmptyContactSet,
    #[error("mass matrix is not positive definite (min pivot {min_pivot:e})")]
    SingularMass { min_pivot: f64 },
    #[error("constrained system is singular (condition estimate {condition:e}, residual {residual:e})")]
    SingularKkt { condition: f64, residual: f64 },
    #[error("impact system is singular (condition estimate {condition:e}, residual {residual:e})")]
    SingularImpact { condition: f64, residual: f64 },
}

fn check_finite(xs: &[f64], what: &'static str) -> Result<(), DynamicsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite(what))
    }
}

/// Joint-space inertia matrix.
pub fn mass_matrix(model: &RobotModel, q: &[f64; NQ]) -> Result<Mat, DynamicsError> {
    check_finite(q, "configuration")?;
    let pose = Pose::at_rest(model, q);
    let mut m = Mat::zeros(NQ, NQ);
    for link in 0..NLINKS {
        let lp = &model.links[link];
        let kin = pose.com_point(link);
        let jw = pose.angle_jac(link);
        for r in 0..NQ {
            for c in r..NQ {
                let v = lp.mass * (kin.jac[0][r] * kin.jac[0][c] + kin.jac[1][r] * kin.jac[1][c])
                    + lp.inertia * jw[r] * jw[c];
                m[(r, c)] += v;
            }
        }
    }
    for r in 0..NQ {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    Ok(m)
}

/// Coriolis, centrifugal and gravity terms `H(q, q̇)`.
pub fn bias_forces(model: &RobotModel, q: &[f64; NQ], qd: &[f64; NQ]) -> Result<[f64; NQ], DynamicsError> {
    check_finite(q, "configuration")?;
    check_finite(qd, "velocity")?;
    let pose = Pose::new(model, q, qd);
    let mut h = [0.0; NQ];
    for link in 0..NLINKS {
        let m = model.links[link].mass;
        let kin = pose.com_point(link);
        // planar bodies have no gyroscopic term; only the point-mass part biases
        let fx = m * kin.bias[0];
        let fz = m * (kin.bias[1] + model.gravity);
        for k in 0..NQ {
            h[k] += kin.jac[0][k] * fx + kin.jac[1][k] * fz;
        }
    }
    Ok(h)
}

/// Total kinetic energy `½ q̇ᵀ M q̇`.
pub fn kinetic_energy(model: &RobotModel, state: &GeneralizedState) -> f64 {
    let pose = Pose::new(model, &state.q, &state.qd);
    (0..NLINKS)
        .map(|link| {
            let lp = &model.links[link];
            let v = pose.com_point(link).vel;
            let w = pose.angular_rate(link);
            0.5 * lp.mass * (v[0] * v[0] + v[1] * v[1]) + 0.5 * lp.inertia * w * w
        })
        .sum()
}

/// Gravitational potential energy relative to z = 0.
pub fn potential_energy(model: &RobotModel, q: &[f64; NQ]) -> f64 {
    let pose = Pose::at_rest(model, q);
    (0..NLINKS)
        .map(|link| model.links[link].mass * model.gravity * pose.com_point(link).pos[1])
        .sum()
}

pub fn total_energy(model: &RobotModel, state: &GeneralizedState) -> f64 {
    kinetic_energy(model, state) + potential_energy(model, &state.q)
}

/// Stacked contact Jacobian and its velocity-product term `J̇ q̇`.
pub fn contact_jacobian(
    model: &RobotModel,
    state: &GeneralizedState,
    contacts: ContactSet,
) -> Result<(Mat, Vec<f64>), DynamicsError> {
    if contacts.is_empty() {
        return Err(DynamicsError::EmptyContactSet);
    }
    check_finite(&state.q, "configuration")?;
    check_finite(&state.qd, "velocity")?;
    let pose = Pose::new(model, &state.q, &state.qd);
    let rows = 3 * contacts.len();
    let mut j = Mat::zeros(rows, NQ);
    let mut jd = vec![0.0; rows];
    for (k, side) in contacts.sides().enumerate() {
        let ankle = pose.ankle(side);
        let ang = pose.angle_jac(side.foot_link());
        j.row_mut(3 * k).copy_from_slice(&ankle.jac[0]);
        j.row_mut(3 * k + 1).copy_from_slice(&ankle.jac[1]);
        j.row_mut(3 * k + 2).copy_from_slice(&ang);
        jd[3 * k] = ankle.bias[0];
        jd[3 * k + 1] = ankle.bias[1];
        // foot angle is linear in q, so its row has no velocity product
        jd[3 * k + 2] = 0.0;
    }
    Ok((j, jd))
}

/// Generalized forces of a horizontal/vertical force at the pelvis origin.
pub fn pelvis_force(f_ext: [f64; 2]) -> [f64; NQ] {
    let mut g = [0.0; NQ];
    g[0] = f_ext[0];
    g[1] = f_ext[1];
    g
}

#[derive(Clone, Debug, PartialEq)]
pub struct Accelerations {
    pub qdd: [f64; NQ],
    pub wrench: Wrench,
    /// `‖J q̈ + J̇ q̇‖` of the returned solution.
    pub constraint_residual: f64,
    pub condition: f64,
}

fn factor_mass(m: &Mat) -> Result<Cholesky, DynamicsError> {
    Cholesky::new(m).ok_or(DynamicsError::SingularMass { min_pivot: 0.0 })
}

/// Solves `A x = b` for the constraint-space inertia, minimum-norm when
/// `A` is rank deficient. Returns `(x, condition)`.
fn solve_constraint_space(a: &Mat, b: &[f64]) -> (Vec<f64>, f64) {
    if let Some(ch) = Cholesky::new(a) {
        let max_diag = (0..a.rows()).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let piv = ch.min_pivot();
        let cond = max_diag / (piv * piv);
        if cond < CHOL_COND_LIMIT {
            return (ch.solve(b), cond);
        }
    }
    let sol = pinv_solve_psd(a, b, RANK_TOL);
    (sol.x, sol.condition)
}

/// Constrained forward dynamics.
pub fn forward_dynamics(
    model: &RobotModel,
    state: &GeneralizedState,
    u: &[f64; NU],
    contacts: ContactSet,
    f_ext: [f64; 2],
) -> Result<Accelerations, DynamicsError> {
    check_finite(u, "torque")?;
    check_finite(&f_ext, "external force")?;
    let m = mass_matrix(model, &state.q)?;
    let h = bias_forces(model, &state.q, &state.qd)?;
    let chol = factor_mass(&m)?;
    let ext = pelvis_force(f_ext);
    let mut rhs = [0.0; NQ];
    for k in 0..NQ {
        let bu = if k >= 3 { u[k - 3] } else { 0.0 };
        rhs[k] = bu + ext[k] - h[k];
    }
    let free = chol.solve(&rhs);
    if contacts.is_empty() {
        let mut qdd = [0.0; NQ];
        qdd.copy_from_slice(&free);
        return Ok(Accelerations {
            qdd,
            wrench: Wrench::default(),
            constraint_residual: 0.0,
            condition: 1.0,
        });
    }
    let (j, jd) = contact_jacobian(model, state, contacts)?;
    let minv_jt = chol.solve_mat(&j.transpose());
    let a = j.mul(&minv_jt);
    let jfree = j.mul_vec(&free);
    let b: Vec<f64> = jd.iter().zip(&jfree).map(|(d, f)| -d - f).collect();
    let (lambda, condition) = solve_constraint_space(&a, &b);
    let corr = minv_jt.mul_vec(&lambda);
    let mut qdd = [0.0; NQ];
    for k in 0..NQ {
        qdd[k] = free[k] + corr[k];
    }
    let res: Vec<f64> = j
        .mul_vec(&qdd)
        .iter()
        .zip(&jd)
        .map(|(a, b)| a + b)
        .collect();
    let residual = norm(&res);
    let scale = 1.0 + norm(&jd) + norm(&jfree);
    if !residual.is_finite() || residual > CONSISTENCY_TOL * scale {
        return Err(DynamicsError::SingularKkt { condition, residual });
    }
    Ok(Accelerations {
        qdd,
        wrench: Wrench::from_multipliers(contacts, &lambda),
        constraint_residual: residual,
        condition,
    })
}

/// Plastic impact: post-impact velocity with `J q̇⁺ = 0` for `new_contacts`.
///
/// Returns the new velocity and the contact impulses (N·s, N·m·s).
pub fn impact_map(
    model: &RobotModel,
    state: &GeneralizedState,
    new_contacts: ContactSet,
) -> Result<([f64; NQ], Wrench), DynamicsError> {
    if new_contacts.is_empty() {
        return Err(DynamicsError::EmptyContactSet);
    }
    let m = mass_matrix(model, &state.q)?;
    let chol = factor_mass(&m)?;
    let (j, _) = contact_jacobian(model, state, new_contacts)?;
    project_velocity(&chol, &j, &state.qd).map_err(|e| match e {
        DynamicsError::SingularKkt { condition, residual } => DynamicsError::SingularImpact { condition, residual },
        other => other,
    })
    .map(|(qd, imp)| (qd, Wrench::from_multipliers(new_contacts, &imp)))
}

/// Inertia-weighted projection of `qd` onto `{J q̇ = 0}`.
fn project_velocity(chol: &Cholesky, j: &Mat, qd: &[f64; NQ]) -> Result<([f64; NQ], Vec<f64>), DynamicsError> {
    let minv_jt = chol.solve_mat(&j.transpose());
    let a = j.mul(&minv_jt);
    let jv = j.mul_vec(qd);
    let b: Vec<f64> = jv.iter().map(|x| -x).collect();
    let (imp, condition) = solve_constraint_space(&a, &b);
    let corr = minv_jt.mul_vec(&imp);
    let mut out = *qd;
    for k in 0..NQ {
        out[k] += corr[k];
    }
    let residual = norm(&j.mul_vec(&out));
    if !residual.is_finite() || residual > CONSISTENCY_TOL * (1.0 + norm(&jv)) {
        return Err(DynamicsError::SingularKkt { condition, residual });
    }
    Ok((out, imp))
}

/// Where each constrained sole is pinned: ankle x, ankle z, foot angle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoleAnchor {
    pub x: f64,
    pub z: f64,
    pub angle: f64,
}

impl SoleAnchor {
    pub fn capture(model: &RobotModel, q: &[f64; NQ], side: Side) -> Self {
        let pose = Pose::at_rest(model, q);
        let a = pose.ankle(side).pos;
        Self {
            x: a[0],
            z: a[1],
            angle: pose.angle(side.foot_link()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub left: SoleAnchor,
    pub right: SoleAnchor,
}

impl Anchors {
    pub fn get(&self, side: Side) -> SoleAnchor {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn set(&mut self, side: Side, anchor: SoleAnchor) {
        match side {
            Side::Left => self.left = anchor,
            Side::Right => self.right = anchor,
        }
    }
}

/// Position-level constraint violation for the active soles.
pub fn constraint_error(model: &RobotModel, q: &[f64; NQ], contacts: ContactSet, anchors: &Anchors) -> Vec<f64> {
    let pose = Pose::at_rest(model, q);
    let mut out = Vec::with_capacity(3 * contacts.len());
    for side in contacts.sides() {
        let a = pose.ankle(side).pos;
        let anc = anchors.get(side);
        out.push(a[0] - anc.x);
        out.push(a[1] - anc.z);
        out.push(pose.angle(side.foot_link()) - anc.angle);
    }
    out
}

/// Pulls `state` back onto the contact manifold: a few Gauss-Newton steps on
/// position, then an inertia-weighted velocity projection.
pub fn project_onto_contacts(
    model: &RobotModel,
    state: &mut GeneralizedState,
    contacts: ContactSet,
    anchors: &Anchors,
) -> Result<(), DynamicsError> {
    if contacts.is_empty() {
        return Ok(());
    }
    for _ in 0..4 {
        let err = constraint_error(model, &state.q, contacts, anchors);
        if norm(&err) < 1e-13 {
            break;
        }
        let (j, _) = contact_jacobian(model, state, contacts)?;
        let jjt = j.mul(&j.transpose());
        let (y, _) = solve_constraint_space(&jjt, &err);
        let dq = j.tr_mul_vec(&y);
        for k in 0..NQ {
            state.q[k] -= dq[k];
        }
    }
    let m = mass_matrix(model, &state.q)?;
    let chol = factor_mass(&m)?;
    let (j, _) = contact_jacobian(model, state, contacts)?;
    let (qd, _) = project_velocity(&chol, &j, &state.qd)?;
    state.qd = qd;
    Ok(())
}

/// Joint torques and contact wrench that realise a prescribed `q̈`.
///
/// Base rows fix the wrench (minimum-norm when it is redundant); joint rows
/// then give the torques.
pub fn inverse_dynamics(
    model: &RobotModel,
    state: &GeneralizedState,
    qdd: &[f64; NQ],
    contacts: ContactSet,
) -> Result<([f64; NU], Wrench), DynamicsError> {
    let m = mass_matrix(model, &state.q)?;
    let h = bias_forces(model, &state.q, &state.qd)?;
    let mqdd = m.mul_vec(qdd);
    let mut tau = [0.0; NQ];
    for k in 0..NQ {
        tau[k] = mqdd[k] + h[k];
    }
    let mut lambda = Vec::new();
    if !contacts.is_empty() {
        let (j, _) = contact_jacobian(model, state, contacts)?;
        // base rows: J_baseᵀ λ = τ_base, solve min-norm via (J_b J_bᵀ)
        let jb = Mat::from_fn(j.rows(), 3, |r, c| j[(r, c)]);
        let jbt_jb = jb.transpose().mul(&jb);
        let (y, _) = solve_constraint_space(&jbt_jb, &tau[..3]);
        lambda = jb.mul_vec(&y);
        let jt_l = j.tr_mul_vec(&lambda);
        for k in 0..NQ {
            tau[k] -= jt_l[k];
        }
    }
    let mut u = [0.0; NU];
    u.copy_from_slice(&tau[3..]);
    Ok((u, Wrench::from_multipliers(contacts, &lambda)))
}

/// `J q̈ + J̇ q̇` for a candidate acceleration.
pub fn constraint_acceleration(
    model: &RobotModel,
    state: &GeneralizedState,
    qdd: &[f64; NQ],
    contacts: ContactSet,
) -> Result<Vec<f64>, DynamicsError> {
    let (j, jd) = contact_jacobian(model, state, contacts)?;
    Ok(j.mul_vec(qdd).iter().zip(&jd).map(|(a, b)| a + b).collect())
}

/// Base velocity that keeps `side` pinned for given joint rates.
pub fn base_rates_for_stance(
    model: &RobotModel,
    q: &[f64; NQ],
    joint_rates: &[f64; NU],
    side: Side,
) -> Result<[f64; 3], DynamicsError> {
    let mut qd = [0.0; NQ];
    qd[3..].copy_from_slice(joint_rates);
    let st = GeneralizedState::new(*q, qd);
    let (j, _) = contact_jacobian(model, &st, ContactSet::single(side))?;
    let jb = Mat::from_fn(3, 3, |r, c| j[(r, c)]);
    let rhs: Vec<f64> = (0..3).map(|r| -dot(&j.row(r)[3..], joint_rates)).collect();
    let ch = Cholesky::new(&jb.transpose().mul(&jb)).ok_or(DynamicsError::SingularKkt {
        condition: f64::INFINITY,
        residual: f64::NAN,
    })?;
    let x = ch.solve(&jb.tr_mul_vec(&rhs));
    Ok([x[0], x[1], x[2]])
}
