//! Periodic gaits as Bézier desired outputs, their synthesis from an
//! inverse-kinematics pattern generator, and feasibility checking.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bezier::{bezier_eval, fit_pinned};
use crate::dynamics::{base_rates_for_stance, contact_jacobian, inverse_dynamics, DynamicsError, GeneralizedState};
use crate::hybrid::{DomainCycle, DomainId};
use crate::kinematics::Pose;
use crate::linalg::{Cholesky, Mat};
use crate::model::{RobotModel, Side, NQ, NU};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitDomain {
    pub id: DomainId,
    /// Nominal duration, s.
    #[serde(rename = "T")]
    pub duration: f64,
    /// One row of Bézier control points per actuated joint.
    pub alpha: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gait {
    pub model_fingerprint: String,
    /// m/s
    pub design_speed: f64,
    /// In cycle order, starting with left single support.
    pub domains: Vec<GaitDomain>,
}

/// Desired joint outputs and their time derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Desired {
    pub y: [f64; NU],
    pub yd: [f64; NU],
    pub ydd: [f64; NU],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaitError {
    #[error("gait must list the four domains in cycle order")]
    DomainOrder,
    #[error("domain {0:?}: duration must be positive")]
    Duration(DomainId),
    #[error("domain {domain:?}: expected {NU} rows of equal length >= 2")]
    Shape { domain: DomainId },
    #[error("domain {0:?}: non-finite coefficient")]
    NonFinite(DomainId),
    #[error("step length {step_length} inconsistent with speed x step period {expected}")]
    StepLength { step_length: f64, expected: f64 },
    #[error("invalid synthesis parameter: {0}")]
    Param(&'static str),
    #[error("{side:?} ankle unreachable in {domain:?} at phase {tau:.4}")]
    Unreachable { domain: DomainId, side: Side, tau: f64 },
    #[error("fit residual {residual:.2e} rad exceeds limit for joint {joint} in {domain:?}")]
    FitResidual { domain: DomainId, joint: usize, residual: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl Gait {
    pub fn validate(&self) -> Result<(), GaitError> {
        if self.domains.len() != 4 || self.domains.iter().zip(DomainId::CYCLE).any(|(d, id)| d.id != id) {
            return Err(GaitError::DomainOrder);
        }
        let width = self.domains[0].alpha.first().map_or(0, |r| r.len());
        for d in &self.domains {
            if !(d.duration > 0.0) || !d.duration.is_finite() {
                return Err(GaitError::Duration(d.id));
            }
            if d.alpha.len() != NU || width < 2 || d.alpha.iter().any(|r| r.len() != width) {
                return Err(GaitError::Shape { domain: d.id });
            }
            if d.alpha.iter().flatten().any(|a| !a.is_finite()) {
                return Err(GaitError::NonFinite(d.id));
            }
        }
        Ok(())
    }

    pub fn domain(&self, id: DomainId) -> &GaitDomain {
        &self.domains[id.index()]
    }

    pub fn degree(&self) -> usize {
        self.domains[0].alpha[0].len() - 1
    }

    pub fn durations(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.domains[i].duration)
    }

    pub fn cycle(&self) -> DomainCycle {
        DomainCycle::new(self.durations())
    }

    /// Step period: one single plus one double support, s.
    pub fn step_period(&self) -> f64 {
        self.domains[0].duration + self.domains[1].duration
    }

    /// Desired outputs at phase `tau`; phases past the end of a domain hold
    /// the final value (late touchdown).
    pub fn desired(&self, id: DomainId, tau: f64) -> Desired {
        let d = self.domain(id);
        let tau = tau.clamp(0.0, 1.0);
        let mut out = Desired::default();
        for (j, row) in d.alpha.iter().enumerate() {
            let p = bezier_eval(row, tau, d.duration);
            out.y[j] = p.y;
            out.yd[j] = p.ydot;
            out.ydd[j] = p.yddot;
        }
        out
    }

    /// Largest mismatch between a domain's final output and its
    /// successor's initial output, rad.
    pub fn boundary_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for id in DomainId::CYCLE {
            let end = self.desired(id, 1.0).y;
            let start = self.desired(id.successor(), 0.0).y;
            for j in 0..NU {
                worst = worst.max((end[j] - start[j]).abs());
            }
        }
        worst
    }

    /// Copy with the torso pitched back by `delta` rad throughout: both hip
    /// rows shift so the stance chain tilts the torso while thighs keep
    /// their absolute angles.
    pub fn with_pitch_offset(&self, model: &RobotModel, delta: f64) -> Gait {
        let mut g = self.clone();
        for d in &mut g.domains {
            for side in [Side::Left, Side::Right] {
                let s = model.axis_sign(side.hip());
                for a in &mut d.alpha[side.hip()] {
                    *a -= delta * s;
                }
            }
        }
        g
    }

    /// Full state along the gait with the reference sole pinned flat at the
    /// origin, plus the consistent generalized acceleration.
    pub fn reconstruct(
        &self,
        model: &RobotModel,
        id: DomainId,
        tau: f64,
    ) -> Result<(GeneralizedState, [f64; NQ]), GaitError> {
        let des = self.desired(id, tau);
        let side = id.reference_side();
        let q = configuration_on_sole(model, &des.y, side, 0.0);
        let base = base_rates_for_stance(model, &q, &des.yd, side)?;
        let mut qd = [0.0; NQ];
        qd[..3].copy_from_slice(&base);
        qd[3..].copy_from_slice(&des.yd);
        let state = GeneralizedState::new(q, qd);
        // J q̈ + J̇ q̇ = 0 fixes the base accelerations
        let (j, jd) = contact_jacobian(model, &state, crate::dynamics::ContactSet::single(side))?;
        let jb = Mat::from_fn(3, 3, |r, c| j[(r, c)]);
        let rhs: Vec<f64> = (0..3)
            .map(|r| -jd[r] - crate::linalg::dot(&j.row(r)[3..], &des.ydd))
            .collect();
        let ch = Cholesky::new(&jb.transpose().mul(&jb)).ok_or(DynamicsError::SingularKkt {
            condition: f64::INFINITY,
            residual: f64::NAN,
        })?;
        let xb = ch.solve(&jb.tr_mul_vec(&rhs));
        let mut qdd = [0.0; NQ];
        qdd[..3].copy_from_slice(&xb);
        qdd[3..].copy_from_slice(&des.ydd);
        Ok((state, qdd))
    }

    /// Start of left single support with the left ankle above `x = 0`.
    pub fn initial_state(&self, model: &RobotModel) -> Result<GeneralizedState, GaitError> {
        Ok(self.reconstruct(model, DomainId::LeftSS, 0.0)?.0)
    }
}

/// Configuration with `side`'s sole flat on the ground, its ankle above
/// `ankle_x`.
pub fn configuration_on_sole(model: &RobotModel, joints: &[f64; NU], side: Side, ankle_x: f64) -> [f64; NQ] {
    let s = |j: usize| model.axis_sign(j);
    let pitch = -(s(side.hip()) * joints[side.hip()]
        + s(side.knee()) * joints[side.knee()]
        + s(side.ankle()) * joints[side.ankle()]);
    let mut q = [0.0; NQ];
    q[2] = pitch;
    q[3..].copy_from_slice(joints);
    let a = Pose::at_rest(model, &q).ankle(side).pos;
    q[0] = ankle_x - a[0];
    q[1] = model.ankle_height() - a[1];
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    /// Design speed, m/s.
    pub speed: f64,
    /// m; must equal `speed * (t_ss + t_ds)`.
    pub step_length: f64,
    pub t_ss: f64,
    pub t_ds: f64,
    /// Hip height above the ground, m.
    pub pelvis_height: f64,
    /// Peak swing-sole lift, m.
    pub clearance: f64,
    /// Downward sole speed at touchdown, m/s.
    #[serde(default = "default_touchdown_speed")]
    pub touchdown_speed: f64,
    /// Upward sole speed at lift-off, m/s.
    #[serde(default = "default_touchdown_speed")]
    pub liftoff_speed: f64,
    /// Forward shift of the pelvis relative to the symmetric schedule, m.
    #[serde(default)]
    pub pelvis_lead: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// IK samples per domain for the fit.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest tolerated fit residual, rad.
    #[serde(default = "default_fit_tol")]
    pub fit_tolerance: f64,
}

fn default_touchdown_speed() -> f64 {
    0.05
}
fn default_degree() -> usize {
    5
}
fn default_samples() -> usize {
    101
}
fn default_fit_tol() -> f64 {
    1e-3
}

impl SynthParams {
    /// Consistent parameters for a design speed with the default timing.
    pub fn for_speed(speed: f64) -> Self {
        let t_ss = 0.6;
        let t_ds = 0.15;
        Self {
            speed,
            step_length: speed * (t_ss + t_ds),
            t_ss,
            t_ds,
            pelvis_height: 0.78,
            clearance: 0.04,
            touchdown_speed: default_touchdown_speed(),
            liftoff_speed: default_touchdown_speed(),
            pelvis_lead: 0.0,
            degree: default_degree(),
            samples: default_samples(),
            fit_tolerance: default_fit_tol(),
        }
    }
}

/// Hip and knee and ankle angles placing the ankle at `ankle` with the
/// foot at absolute angle `foot_angle`; the knee bends forward.
pub fn leg_ik(
    model: &RobotModel,
    side: Side,
    hip: [f64; 2],
    pitch: f64,
    ankle: [f64; 2],
    foot_angle: f64,
) -> Option<[f64; 3]> {
    let l1 = model.links[side.hip() + 1].length;
    let l2 = model.links[side.hip() + 2].length;
    let dx = ankle[0] - hip[0];
    let dz = ankle[1] - hip[1];
    let r = libm::hypot(dx, dz);
    if r >= l1 + l2 || r <= (l1 - l2).abs() {
        return None;
    }
    let alpha = libm::atan2(dx, -dz);
    let beta1 = libm::acos(((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0));
    let beta2 = libm::acos(((l2 * l2 + r * r - l1 * l1) / (2.0 * l2 * r)).clamp(-1.0, 1.0));
    let thigh = alpha + beta1;
    let shank = alpha - beta2;
    let s = |j: usize| model.axis_sign(j);
    Some([
        (thigh - pitch) * s(side.hip()),
        (shank - thigh) * s(side.knee()),
        (foot_angle - shank) * s(side.ankle()),
    ])
}

fn minimum_jerk(tau: f64) -> f64 {
    tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

fn mirror(y: &[f64; NU]) -> [f64; NU] {
    [y[3], y[4], y[5], y[0], y[1], y[2]]
}

/// Swing sole lift over the step: a symmetric bump of height `clearance`
/// plus a term giving the touchdown descent rate.
fn swing_lift(p: &SynthParams, tau: f64) -> f64 {
    let a = p.liftoff_speed * p.t_ss;
    let b = p.touchdown_speed * p.t_ss;
    let s = 1.0 - tau;
    16.0 * p.clearance * tau * tau * s * s + a * tau * s * s + b * tau * tau * s
}

/// Builds a periodic four-domain gait for `model`.
///
/// The pelvis moves at constant height, constant pitch zero and constant
/// speed; the swing ankle follows a minimum-jerk forward profile under a
/// clearance bump with the foot held flat. Left single support and the
/// following double support are solved by IK; the other half-cycle mirrors
/// them.
pub fn synthesize_gait(model: &RobotModel, p: &SynthParams) -> Result<Gait, GaitError> {
    synthesize_gait_with_residual(model, p).map(|(g, _)| g)
}

/// As [`synthesize_gait`], also returning the largest fit residual, rad.
pub fn synthesize_gait_with_residual(model: &RobotModel, p: &SynthParams) -> Result<(Gait, f64), GaitError> {
    if !(p.t_ss > 0.0 && p.t_ds > 0.0) {
        return Err(GaitError::Param("domain durations must be positive"));
    }
    if p.degree < 2 || p.samples < p.degree + 2 {
        return Err(GaitError::Param("degree >= 2 and samples > degree + 1 required"));
    }
    if !(p.clearance >= 0.0 && p.touchdown_speed >= 0.0 && p.liftoff_speed >= 0.0 && p.pelvis_height > 0.0) {
        return Err(GaitError::Param("clearance, touchdown speed and pelvis height"));
    }
    let expected = p.speed * (p.t_ss + p.t_ds);
    if (expected - p.step_length).abs() > 1e-9 {
        return Err(GaitError::StepLength {
            step_length: p.step_length,
            expected,
        });
    }
    let h_a = model.ankle_height();
    let len = p.step_length;
    let x0 = -0.5 * p.speed * p.t_ss + p.pelvis_lead;

    let solve = |domain: DomainId, tau: f64| -> Result<[f64; NU], GaitError> {
        let (t, swing_x, swing_z) = match domain {
            DomainId::LeftSS => (
                tau * p.t_ss,
                -len + 2.0 * len * minimum_jerk(tau),
                h_a + swing_lift(p, tau),
            ),
            _ => (p.t_ss + tau * p.t_ds, len, h_a),
        };
        let hip = [x0 + p.speed * t, p.pelvis_height];
        let left = leg_ik(model, Side::Left, hip, 0.0, [0.0, h_a], 0.0).ok_or(GaitError::Unreachable {
            domain,
            side: Side::Left,
            tau,
        })?;
        let right = leg_ik(model, Side::Right, hip, 0.0, [swing_x, swing_z], 0.0).ok_or(GaitError::Unreachable {
            domain,
            side: Side::Right,
            tau,
        })?;
        Ok([left[0], left[1], left[2], right[0], right[1], right[2]])
    };

    let ds_end = solve(DomainId::DS1, 1.0)?;
    let ss_start = mirror(&ds_end);
    let ss_end = solve(DomainId::LeftSS, 1.0)?;

    let mut worst_fit: f64 = 0.0;
    let mut fit_domain = |domain: DomainId, start: &[f64; NU], end: &[f64; NU]| -> Result<Vec<Vec<f64>>, GaitError> {
        let n = p.samples;
        let mut samples: Vec<[f64; NU]> = Vec::with_capacity(n);
        let taus: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        for &tau in &taus {
            samples.push(solve(domain, tau)?);
        }
        let mut rows = Vec::with_capacity(NU);
        for j in 0..NU {
            let pts: Vec<(f64, f64)> = taus.iter().zip(&samples).map(|(t, s)| (*t, s[j])).collect();
            let (coeffs, residual) = fit_pinned(&pts, p.degree, start[j], end[j]);
            if residual > p.fit_tolerance {
                return Err(GaitError::FitResidual {
                    domain,
                    joint: j,
                    residual,
                });
            }
            worst_fit = worst_fit.max(residual);
            rows.push(coeffs);
        }
        Ok(rows)
    };

    let left_ss = fit_domain(DomainId::LeftSS, &ss_start, &ss_end)?;
    let ds1 = fit_domain(DomainId::DS1, &ss_end, &ds_end)?;
    let mirror_rows = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        vec![
            rows[3].clone(),
            rows[4].clone(),
            rows[5].clone(),
            rows[0].clone(),
            rows[1].clone(),
            rows[2].clone(),
        ]
    };
    let right_ss = mirror_rows(&left_ss);
    let ds2 = mirror_rows(&ds1);
    let gait = Gait {
        model_fingerprint: model.fingerprint(),
        design_speed: p.speed,
        domains: vec![
            GaitDomain {
                id: DomainId::LeftSS,
                duration: p.t_ss,
                alpha: left_ss,
            },
            GaitDomain {
                id: DomainId::DS1,
                duration: p.t_ds,
                alpha: ds1,
            },
            GaitDomain {
                id: DomainId::RightSS,
                duration: p.t_ss,
                alpha: right_ss,
            },
            GaitDomain {
                id: DomainId::DS2,
                duration: p.t_ds,
                alpha: ds2,
            },
        ],
    };
    gait.validate()?;
    Ok((gait, worst_fit))
}

/// Bounds for [`check_gait`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitBounds {
    /// rad
    pub pitch_min: f64,
    /// rad
    pub pitch_max: f64,
    /// Peak of the minimum-clearance tent, m.
    pub clearance_min_peak: f64,
    /// Half-width (in phase) of the minimum-clearance tent.
    pub clearance_min_half_width: f64,
    /// Maximum clearance at lift-off and touchdown, m.
    pub clearance_max_base: f64,
    /// Peak of the maximum-clearance tent, m.
    pub clearance_max_peak: f64,
    /// Largest allowed downward sole speed at touchdown, m/s.
    pub touchdown_speed_max: f64,
    /// Friction coefficient override; the model's value when absent.
    pub friction: Option<f64>,
    /// rad
    pub periodicity_tol: f64,
    /// Grid points per domain.
    pub grid: usize,
    /// Round-off allowance on every margin.
    pub slack: f64,
}

impl Default for GaitBounds {
    fn default() -> Self {
        Self {
            pitch_min: -0.15,
            pitch_max: 0.15,
            clearance_min_peak: 0.01,
            clearance_min_half_width: 0.35,
            clearance_max_base: 0.03,
            clearance_max_peak: 0.12,
            touchdown_speed_max: 0.10,
            friction: None,
            periodicity_tol: 1e-9,
            grid: 200,
            slack: 1e-9,
        }
    }
}

impl GaitBounds {
    /// Piecewise-linear minimum swing clearance, zero near lift-off and
    /// touchdown and peaking mid-swing.
    pub fn clearance_min(&self, tau: f64) -> f64 {
        let w = self.clearance_min_half_width;
        self.clearance_min_peak * (1.0 - (tau - 0.5).abs() / w).max(0.0)
    }

    pub fn clearance_max(&self, tau: f64) -> f64 {
        let tent = 1.0 - 2.0 * (tau - 0.5).abs();
        self.clearance_max_base + (self.clearance_max_peak - self.clearance_max_base) * tent
    }
}

pub const TORSO_PITCH: &str = "torso_pitch";
pub const SWING_CLEARANCE_MIN: &str = "swing_clearance_min";
pub const SWING_CLEARANCE_MAX: &str = "swing_clearance_max";
pub const IMPACT_VELOCITY: &str = "impact_velocity";
pub const FRICTION_CONE: &str = "friction_cone";
pub const CENTER_OF_PRESSURE: &str = "center_of_pressure";
pub const PERIODICITY: &str = "periodicity";

/// Outcome of one constraint. `worst_margin` is the signed slack at the
/// tightest point: positive when satisfied, negative when violated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub satisfied: bool,
    pub worst_margin: f64,
    pub units: String,
    pub domain: Option<DomainId>,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

struct Tracker {
    name: &'static str,
    units: &'static str,
    worst: f64,
    domain: Option<DomainId>,
    tau: f64,
    slack: f64,
}

impl Tracker {
    fn new(name: &'static str, units: &'static str, slack: f64) -> Self {
        Self {
            name,
            units,
            worst: f64::INFINITY,
            domain: None,
            tau: 0.0,
            slack,
        }
    }

    fn offer(&mut self, margin: f64, domain: DomainId, tau: f64) {
        // NaN margins (e.g. zero normal force) count as violations
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if m < self.worst {
            self.worst = m;
            self.domain = Some(domain);
            self.tau = tau;
        }
    }

    fn finish(self) -> ConstraintCheck {
        let satisfied = self.worst >= -self.slack;
        ConstraintCheck {
            name: self.name.to_string(),
            satisfied,
            worst_margin: self.worst,
            units: self.units.to_string(),
            domain: self.domain,
            tau: self.tau,
        }
    }
}

/// Evaluates the gait against torso, clearance, impact, contact-wrench and
/// periodicity constraints on a dense phase grid.
pub fn check_gait(model: &RobotModel, gait: &Gait, bounds: &GaitBounds) -> ConstraintReport {
    let mu = bounds.friction.unwrap_or(model.friction);
    let h_a = model.ankle_height();
    let mut torso = Tracker::new(TORSO_PITCH, "rad", bounds.slack);
    let mut cl_min = Tracker::new(SWING_CLEARANCE_MIN, "m", bounds.slack);
    let mut cl_max = Tracker::new(SWING_CLEARANCE_MAX, "m", bounds.slack);
    let mut impact = Tracker::new(IMPACT_VELOCITY, "m/s", bounds.slack);
    let mut friction = Tracker::new(FRICTION_CONE, "N", bounds.slack);
    let mut cop = Tracker::new(CENTER_OF_PRESSURE, "m", bounds.slack);
    let mut periodic = Tracker::new(PERIODICITY, "rad", 0.0);

    let n = bounds.grid.max(2);
    for id in DomainId::CYCLE {
        for i in 0..n {
            let tau = i as f64 / (n - 1) as f64;
            let (state, qdd) = match gait.reconstruct(model, id, tau) {
                Ok(v) => v,
                Err(_) => {
                    torso.offer(f64::NAN, id, tau);
                    continue;
                }
            };
            let pitch = state.q[2];
            torso.offer((pitch - bounds.pitch_min).min(bounds.pitch_max - pitch), id, tau);

            let pose = Pose::new(model, &state.q, &state.qd);
            if id.is_single_support() {
                let sw = id.swing_side();
                let h = pose.sole_height(sw);
                cl_min.offer(h - bounds.clearance_min(tau), id, tau);
                cl_max.offer(bounds.clearance_max(tau) - h, id, tau);
                if i == n - 1 {
                    let toe = pose.toe(sw);
                    let heel = pose.heel(sw);
                    let hdot = if toe.pos[1] <= heel.pos[1] { toe.vel[1] } else { heel.vel[1] };
                    impact.offer((hdot + bounds.touchdown_speed_max).min(-hdot), id, tau);
                }
            }

            match inverse_dynamics(model, &state, &qdd, id.contacts()) {
                Ok((_, wrench)) => {
                    for side in id.contacts().sides() {
                        let w = wrench.get(side).expect("wrench for active sole");
                        friction.offer(w.normal.min(mu * w.normal - w.tangential.abs()), id, tau);
                        let c = w.center_of_pressure(h_a);
                        cop.offer((c + model.foot.heel_offset).min(model.foot.toe_offset - c), id, tau);
                    }
                }
                Err(_) => {
                    friction.offer(f64::NAN, id, tau);
                    cop.offer(f64::NAN, id, tau);
                }
            }
        }
    }
    periodic.offer(bounds.periodicity_tol - gait.boundary_residual(), DomainId::DS2, 1.0);

    ConstraintReport {
        checks: vec![
            torso.finish(),
            cl_min.finish(),
            cl_max.finish(),
            impact.finish(),
            friction.finish(),
            cop.finish(),
            periodic.finish(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RobotModel {
        RobotModel::planar_biped()
    }

    #[test]
    fn ik_round_trips_through_forward_kinematics() {
        let m = model();
        let hip = [0.05, 0.80];
        let target = [0.12, 0.09];
        let j = leg_ik(&m, Side::Right, hip, 0.0, target, 0.0).unwrap();
        let mut q = [0.0; NQ];
        q[0] = hip[0];
        q[1] = hip[1];
        q[6..9].copy_from_slice(&j);
        let pose = Pose::at_rest(&m, &q);
        let a = pose.ankle(Side::Right).pos;
        assert!((a[0] - target[0]).abs() < 1e-12 && (a[1] - target[1]).abs() < 1e-12);
        assert!(pose.angle(crate::model::FOOT_R).abs() < 1e-12);
        assert!(j[1] < 0.0, "knee bends forward");
    }

    #[test]
    fn ik_rejects_out_of_reach_targets() {
        let m = model();
        assert!(leg_ik(&m, Side::Left, [0.0, 0.95], 0.0, [0.0, 0.06], 0.0).is_none());
    }

    #[test]
    fn inconsistent_step_length_is_rejected() {
        let m = model();
        let mut p = SynthParams::for_speed(0.15);
        p.step_length += 0.01;
        assert!(matches!(synthesize_gait(&m, &p), Err(GaitError::StepLength { .. })));
    }

    #[test]
    fn unreachable_pelvis_height_names_the_phase() {
        let m = model();
        let mut p = SynthParams::for_speed(0.15);
        p.pelvis_height = 0.9;
        assert!(matches!(synthesize_gait(&m, &p), Err(GaitError::Unreachable { .. })));
    }

    #[test]
    fn synthesized_gait_is_periodic_and_feasible() {
        let m = model();
        let g = synthesize_gait(&m, &SynthParams::for_speed(0.15)).unwrap();
        assert!(g.boundary_residual() <= 1e-9);
        let report = check_gait(&m, &g, &GaitBounds::default());
        for c in &report.checks {
            assert!(c.satisfied, "{c:?}");
        }
    }

    #[test]
    fn stepping_in_place_is_mirror_symmetric() {
        let m = model();
        let p = SynthParams {
            clearance: 0.03,
            pelvis_height: 0.76,
            ..SynthParams::for_speed(0.0)
        };
        let g = synthesize_gait(&m, &p).unwrap();
        for tau in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let l = g.desired(DomainId::LeftSS, tau).y;
            let r = g.desired(DomainId::RightSS, tau).y;
            for j in 0..3 {
                assert!((l[j] - r[j + 3]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn check_is_pure() {
        let m = model();
        let g = synthesize_gait(&m, &SynthParams::for_speed(0.1)).unwrap();
        let b = GaitBounds::default();
        assert_eq!(check_gait(&m, &g, &b), check_gait(&m, &g, &b));
    }

    #[test]
    fn injected_violations_are_named() {
        let m = model();
        let g = synthesize_gait(&m, &SynthParams::for_speed(0.15)).unwrap();
        let b = GaitBounds::default();

        let tilted = g.with_pitch_offset(&m, 0.5);
        let r = check_gait(&m, &tilted, &b);
        let torso = r.get(TORSO_PITCH).unwrap();
        assert!(!torso.satisfied);
        assert!((-torso.worst_margin - (0.5 - b.pitch_max)).abs() < 0.02, "{torso:?}");

        let flat = SynthParams {
            clearance: 0.0,
            liftoff_speed: 0.0,
            touchdown_speed: 0.0,
            fit_tolerance: 1e-2,
            ..SynthParams::for_speed(0.15)
        };
        let r = check_gait(&m, &synthesize_gait(&m, &flat).unwrap(), &b);
        assert!(!r.get(SWING_CLEARANCE_MIN).unwrap().satisfied);

        let r = check_gait(&m, &g, &GaitBounds { touchdown_speed_max: 0.0, ..b });
        assert!(!r.get(IMPACT_VELOCITY).unwrap().satisfied);

        let r = check_gait(&m, &g, &GaitBounds { friction: Some(0.0), ..b });
        assert!(!r.get(FRICTION_CONE).unwrap().satisfied);
    }
}
