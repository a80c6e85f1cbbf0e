//! Four-domain walking cycle: continuous flow, guards and resets.
//!
//! ```text
//! LeftSS --touchdown--> DS1 --τ=1--> RightSS --touchdown--> DS2 --τ=1--> LeftSS
//! ```
//!
//! Touchdowns apply the plastic impact map; the end of a double-support
//! phase only releases a sole.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    forward_dynamics, impact_map, project_onto_contacts, Anchors, ContactSet, DynamicsError, GeneralizedState,
    SoleAnchor, Wrench,
};
use crate::kinematics::Pose;
use crate::model::{RobotModel, Side, NQ, NU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainId {
    LeftSS,
    DS1,
    RightSS,
    DS2,
}

impl DomainId {
    pub const CYCLE: [DomainId; 4] = [DomainId::LeftSS, DomainId::DS1, DomainId::RightSS, DomainId::DS2];

    pub fn successor(self) -> DomainId {
        match self {
            DomainId::LeftSS => DomainId::DS1,
            DomainId::DS1 => DomainId::RightSS,
            DomainId::RightSS => DomainId::DS2,
            DomainId::DS2 => DomainId::LeftSS,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn contacts(self) -> ContactSet {
        match self {
            DomainId::LeftSS => ContactSet::LEFT,
            DomainId::RightSS => ContactSet::RIGHT,
            DomainId::DS1 | DomainId::DS2 => ContactSet::BOTH,
        }
    }

    pub fn is_single_support(self) -> bool {
        matches!(self, DomainId::LeftSS | DomainId::RightSS)
    }

    pub fn guard(self) -> GuardKind {
        if self.is_single_support() {
            GuardKind::Touchdown
        } else {
            GuardKind::PhaseComplete
        }
    }

    /// Foot whose sole defines the base pose: the stance foot in single
    /// support, the rear foot in double support.
    pub fn reference_side(self) -> Side {
        match self {
            DomainId::LeftSS | DomainId::DS1 => Side::Left,
            DomainId::RightSS | DomainId::DS2 => Side::Right,
        }
    }

    /// Swinging leg in single support; in double support, the leg that
    /// landed last.
    pub fn swing_side(self) -> Side {
        self.reference_side().other()
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainId::LeftSS => "LeftSS",
            DomainId::DS1 => "DS1",
            DomainId::RightSS => "RightSS",
            DomainId::DS2 => "DS2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardKind {
    /// Swing sole reaches the ground.
    Touchdown,
    /// Phase variable reaches one.
    PhaseComplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub id: DomainId,
    pub contacts: ContactSet,
    pub guard: GuardKind,
    /// Nominal duration, s.
    pub duration: f64,
}

impl Domain {
    pub fn new(id: DomainId, duration: f64) -> Self {
        Self {
            id,
            contacts: id.contacts(),
            guard: id.guard(),
            duration,
        }
    }
}

/// Nominal durations of the four domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainCycle {
    pub domains: [Domain; 4],
}

impl DomainCycle {
    pub fn new(durations: [f64; 4]) -> Self {
        let d = |i: usize| Domain::new(DomainId::CYCLE[i], durations[i]);
        Self {
            domains: [d(0), d(1), d(2), d(3)],
        }
    }

    pub fn get(&self, id: DomainId) -> &Domain {
        &self.domains[id.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    SemiImplicitEuler,
    Rk4,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::SemiImplicitEuler
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridConfig {
    pub integrator: Integrator,
    /// The touchdown guard only fires after the swing sole has risen this
    /// far above the ground in the current domain, m.
    pub arm_clearance: f64,
    /// Guard tolerance for event location (m for touchdown).
    pub guard_tol: f64,
    /// Touchdowns at or before this phase count as scuffing.
    pub premature_phase: f64,
    /// A single-support domain may last at most this many nominal durations.
    pub missed_factor: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::SemiImplicitEuler,
            arm_clearance: 0.005,
            guard_tol: 1e-10,
            premature_phase: 0.5,
            missed_factor: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub domain: DomainId,
    /// Phase within the current domain.
    pub tau: f64,
    /// Number of touchdowns so far.
    pub step_index: u64,
    pub state: GeneralizedState,
    /// Wall time, s.
    pub t: f64,
    /// Time the current domain was entered, s.
    pub t_domain: f64,
    pub anchors: Anchors,
    pub guard_armed: bool,
}

impl HybridState {
    /// Starts in `domain` at `t = 0`, pinning the soles in contact where
    /// they currently are.
    pub fn new(model: &RobotModel, domain: DomainId, state: GeneralizedState) -> Self {
        let mut anchors = Anchors::default();
        for side in [Side::Left, Side::Right] {
            anchors.set(side, SoleAnchor::capture(model, &state.q, side));
        }
        Self {
            domain,
            tau: 0.0,
            step_index: 0,
            state,
            t: 0.0,
            t_domain: 0.0,
            anchors,
            guard_armed: false,
        }
    }

    pub fn contacts(&self) -> ContactSet {
        self.domain.contacts()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HybridError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("missed touchdown in {domain:?}: {elapsed:.3} s elapsed")]
    MissedTouchdown { domain: DomainId, elapsed: f64 },
    #[error("premature touchdown in {domain:?} at phase {tau:.3}")]
    PrematureTouchdown { domain: DomainId, tau: f64 },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
}

/// Supplies joint torques and the external pelvis force during a rollout.
pub trait Actuation {
    fn torques(&self, model: &RobotModel, hs: &HybridState) -> [f64; NU];

    fn external_force(&self, _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Guard function of the current domain; a crossing from positive to zero
/// ends the domain.
pub fn guard_value(domain: DomainId, model: &RobotModel, hs: &HybridState) -> f64 {
    match domain.guard() {
        GuardKind::Touchdown => Pose::at_rest(model, &hs.state.q).sole_height(domain.swing_side()),
        GuardKind::PhaseComplete => 1.0 - hs.tau,
    }
}

/// Pelvis pitched past one radian or sunk below half of standing height.
pub fn detect_fall(model: &RobotModel, state: &GeneralizedState) -> bool {
    state.q[2].abs() > 1.0 || state.q[1] < 0.5 * model.standing_height()
}

fn accelerations(
    model: &RobotModel,
    s: &GeneralizedState,
    u: &[f64; NU],
    contacts: ContactSet,
    f_ext: [f64; 2],
) -> Result<([f64; NQ], Wrench), DynamicsError> {
    let acc = forward_dynamics(model, s, u, contacts, f_ext)?;
    Ok((acc.qdd, acc.wrench))
}

/// One integration step of length `h` with held inputs, followed by
/// projection onto the contact manifold.
pub fn integrate(
    model: &RobotModel,
    s: &GeneralizedState,
    u: &[f64; NU],
    contacts: ContactSet,
    anchors: &Anchors,
    f_ext: [f64; 2],
    h: f64,
    integrator: Integrator,
) -> Result<(GeneralizedState, Wrench), DynamicsError> {
    let (mut next, wrench) = match integrator {
        Integrator::SemiImplicitEuler => {
            let (qdd, w) = accelerations(model, s, u, contacts, f_ext)?;
            let mut n = *s;
            for k in 0..NQ {
                n.qd[k] += h * qdd[k];
                n.q[k] += h * n.qd[k];
            }
            (n, w)
        }
        Integrator::Rk4 => {
            let shifted = |base: &GeneralizedState, kq: &[f64; NQ], kv: &[f64; NQ], a: f64| {
                let mut o = *base;
                for k in 0..NQ {
                    o.q[k] += a * kq[k];
                    o.qd[k] += a * kv[k];
                }
                o
            };
            let (a1, w) = accelerations(model, s, u, contacts, f_ext)?;
            let v1 = s.qd;
            let s2 = shifted(s, &v1, &a1, 0.5 * h);
            let (a2, _) = accelerations(model, &s2, u, contacts, f_ext)?;
            let v2 = s2.qd;
            let s3 = shifted(s, &v2, &a2, 0.5 * h);
            let (a3, _) = accelerations(model, &s3, u, contacts, f_ext)?;
            let v3 = s3.qd;
            let s4 = shifted(s, &v3, &a3, h);
            let (a4, _) = accelerations(model, &s4, u, contacts, f_ext)?;
            let v4 = s4.qd;
            let mut n = *s;
            for k in 0..NQ {
                n.q[k] += h / 6.0 * (v1[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]);
                n.qd[k] += h / 6.0 * (a1[k] + 2.0 * a2[k] + 2.0 * a3[k] + a4[k]);
            }
            (n, w)
        }
    };
    project_onto_contacts(model, &mut next, contacts, anchors)?;
    Ok((next, wrench))
}

/// What happened during one call to [`advance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub from: DomainId,
    pub to: DomainId,
    pub time: f64,
    /// Contact impulse of a touchdown; `None` for a scheduled release.
    pub impulse: Option<Wrench>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advance {
    pub state: HybridState,
    pub transition: Option<Transition>,
    /// Contact wrench at the start of the step.
    pub wrench: Wrench,
    pub torques: [f64; NU],
}

fn with_time(base: &HybridState, s: GeneralizedState, t: f64, duration: f64) -> HybridState {
    let mut hs = *base;
    hs.state = s;
    hs.t = t;
    hs.tau = (t - hs.t_domain) / duration;
    hs
}

/// Integrates one fixed step of length `dt`, locating and applying at most
/// one domain transition inside it.
pub fn advance(
    model: &RobotModel,
    cycle: &DomainCycle,
    hs: &HybridState,
    act: &impl Actuation,
    dt: f64,
    cfg: &HybridConfig,
) -> Result<Advance, HybridError> {
    if !(dt > 0.0) {
        return Err(HybridError::BadStep(dt));
    }
    let domain = *cycle.get(hs.domain);
    let u = act.torques(model, hs);
    let f_ext = act.external_force(hs.t);
    let step = |h: f64| integrate(model, &hs.state, &u, domain.contacts, &hs.anchors, f_ext, h, cfg.integrator);

    let (full, wrench) = step(dt)?;
    let t_end = hs.t + dt;
    let candidate = with_time(hs, full, t_end, domain.duration);

    let event_fraction = match domain.guard {
        GuardKind::PhaseComplete => {
            if candidate.tau >= 1.0 {
                Some((((1.0 - hs.tau) * domain.duration) / dt).clamp(0.0, 1.0))
            } else {
                None
            }
        }
        GuardKind::Touchdown => {
            let g_end = guard_value(domain.id, model, &candidate);
            if hs.guard_armed && g_end <= 0.0 {
                let g0 = guard_value(domain.id, model, hs);
                if g0 > 0.0 {
                    Some(bisect_touchdown(model, hs, domain, &step, dt, cfg)?)
                } else {
                    None
                }
            } else {
                None
            }
        }
    };

    let Some(frac) = event_fraction else {
        let mut next = candidate;
        if domain.guard == GuardKind::Touchdown {
            if !next.guard_armed && guard_value(domain.id, model, &next) > cfg.arm_clearance {
                next.guard_armed = true;
            }
            let elapsed = next.t - next.t_domain;
            if elapsed > cfg.missed_factor * domain.duration {
                return Err(HybridError::MissedTouchdown {
                    domain: domain.id,
                    elapsed,
                });
            }
        }
        return Ok(Advance {
            state: next,
            transition: None,
            wrench,
            torques: u,
        });
    };

    // state at the event
    let h_event = frac * dt;
    let at_event = if h_event > 0.0 { step(h_event)?.0 } else { hs.state };
    let t_event = hs.t + h_event;
    let tau_event = (t_event - hs.t_domain) / domain.duration;
    let next_id = domain.id.successor();
    let mut reset = *hs;
    reset.state = at_event;
    reset.t = t_event;
    let impulse = match domain.guard {
        GuardKind::Touchdown => {
            if tau_event <= cfg.premature_phase {
                return Err(HybridError::PrematureTouchdown {
                    domain: domain.id,
                    tau: tau_event,
                });
            }
            let landing = domain.id.swing_side();
            reset
                .anchors
                .set(landing, SoleAnchor::capture(model, &at_event.q, landing));
            let (qd_plus, imp) = impact_map(model, &at_event, next_id.contacts())?;
            reset.state.qd = qd_plus;
            reset.step_index += 1;
            Some(imp)
        }
        GuardKind::PhaseComplete => None,
    };
    reset.domain = next_id;
    reset.t_domain = t_event;
    reset.tau = 0.0;
    reset.guard_armed = false;
    let transition = Transition {
        from: domain.id,
        to: next_id,
        time: t_event,
        impulse,
    };

    // remainder of the step in the new domain
    let rest = dt - h_event;
    let mut out = reset;
    if rest > 0.0 {
        let nd = *cycle.get(next_id);
        let u2 = act.torques(model, &reset);
        let f2 = act.external_force(t_event);
        let (s2, _) = integrate(model, &reset.state, &u2, nd.contacts, &reset.anchors, f2, rest, cfg.integrator)?;
        out = with_time(&reset, s2, hs.t + dt, nd.duration);
        if nd.guard == GuardKind::Touchdown && guard_value(nd.id, model, &out) > cfg.arm_clearance {
            out.guard_armed = true;
        }
    }
    Ok(Advance {
        state: out,
        transition: Some(transition),
        wrench,
        torques: u,
    })
}

fn bisect_touchdown(
    model: &RobotModel,
    hs: &HybridState,
    domain: Domain,
    step: &impl Fn(f64) -> Result<(GeneralizedState, Wrench), DynamicsError>,
    dt: f64,
    cfg: &HybridConfig,
) -> Result<f64, HybridError> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (s, _) = step(mid * dt)?;
        let probe = with_time(hs, s, hs.t + mid * dt, domain.duration);
        let g = guard_value(domain.id, model, &probe);
        if g.abs() < cfg.guard_tol {
            return Ok(mid);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(hi)
}
