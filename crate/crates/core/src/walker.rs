//! Closed-loop walking controller: gait tracking, per-step speed
//! measurement and sagittal foot-placement regulation.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::control::{
    apply_offset, pd_torque, release_offset, ChannelConfig, ChannelId, ControlError, NetworkConfig, NeuralApproximator,
    PdGains, RegulatorChannel, RegulatorMode, RegulatorOutput,
};
use crate::estimation::{EstimationError, Measurement, NoiseModel, NoiseSource, VelocityAccumulator, VelocityWindow};
use crate::gait::Gait;
use crate::hybrid::{Actuation, HybridState, Transition};
use crate::model::{RobotModel, NU};

/// Horizontal force on the pelvis over a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Push {
    /// s
    pub t_start: f64,
    /// s
    pub duration: f64,
    /// N, positive forward.
    pub force: f64,
}

impl Push {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkerConfig {
    pub gains: PdGains,
    pub mode: RegulatorMode,
    /// m/s
    pub v_des: f64,
    pub sagittal: ChannelConfig,
    pub network: NetworkConfig,
    pub window: VelocityWindow,
    pub noise: NoiseModel,
    /// Servo the swing ankle so the swing sole stays level with the ground
    /// in single support, instead of tracking the nominal ankle profile.
    pub level_swing_foot: bool,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            gains: PdGains::default(),
            mode: RegulatorMode::None,
            v_des: 0.15,
            sagittal: ChannelConfig::default(),
            network: NetworkConfig::default(),
            window: VelocityWindow::FullStep,
            noise: NoiseModel::default(),
            level_swing_foot: true,
        }
    }
}

/// One regulator event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// s
    pub t: f64,
    /// Measured step speed, m/s.
    pub v: f64,
    /// Measured torso pitch, rad.
    pub pitch: f64,
    pub output: RegulatorOutput,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WalkerError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("gait is malformed: {0}")]
    Gait(#[from] crate::gait::GaitError),
}

pub struct Walker {
    gait: Gait,
    cfg: WalkerConfig,
    channel: RegulatorChannel,
    nn: NeuralApproximator,
    acc: VelocityAccumulator,
    noise: NoiseSource,
    pushes: Vec<Push>,
    /// Offset on the current swing hip, rad.
    swing_offset: f64,
    /// Offset being released on the leading hip during double support, rad.
    landed_offset: f64,
    last: Measurement,
    records: Vec<StepRecord>,
}

impl Walker {
    pub fn new(gait: Gait, cfg: WalkerConfig, pushes: Vec<Push>) -> Result<Self, WalkerError> {
        gait.validate()?;
        cfg.gains.validate()?;
        cfg.sagittal.validate()?;
        let nn = NeuralApproximator::new(&cfg.network)?;
        Ok(Self {
            channel: RegulatorChannel::new(ChannelId::Sagittal, cfg.sagittal, cfg.mode),
            acc: VelocityAccumulator::new(cfg.window, 0),
            noise: NoiseSource::new(cfg.noise),
            nn,
            gait,
            cfg,
            pushes,
            swing_offset: 0.0,
            landed_offset: 0.0,
            last: Measurement::default(),
            records: Vec::new(),
        })
    }

    pub fn gait(&self) -> &Gait {
        &self.gait
    }

    pub fn config(&self) -> &WalkerConfig {
        &self.cfg
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn network(&self) -> &NeuralApproximator {
        &self.nn
    }

    pub fn last_measurement(&self) -> Measurement {
        self.last
    }

    /// Latest regulator event, if any.
    pub fn latest(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Offset currently commanded on the swing hip, rad.
    pub fn swing_offset(&self) -> f64 {
        self.swing_offset
    }

    /// Updates the estimator and regulator with the state after a control
    /// tick. Returns the regulator event if one fired on this tick.
    pub fn observe(&mut self, hs: &HybridState, transition: Option<&Transition>) -> Result<Option<StepRecord>, WalkerError> {
        if transition.is_some_and(|t| t.impulse.is_some()) {
            self.landed_offset = self.swing_offset;
            self.swing_offset = 0.0;
            self.acc.reset(hs.step_index as usize);
        }
        self.last = self.noise.measure(hs.state.qd[0], hs.state.q[2]);
        self.acc.accumulate(self.last.vx);
        if !self.acc.due(hs.domain.is_single_support(), hs.tau) {
            return Ok(None);
        }
        let v = self.acc.freeze()?;
        let output = self.channel.step(&mut self.nn, v, self.cfg.v_des, self.last.pitch, hs.t);
        self.swing_offset = output.offset;
        let rec = StepRecord {
            step: hs.step_index,
            t: hs.t,
            v,
            pitch: self.last.pitch,
            output,
        };
        self.records.push(rec);
        Ok(Some(rec))
    }

    /// Desired joint outputs including the foot-placement offset.
    pub fn desired(&self, model: &RobotModel, hs: &HybridState) -> ([f64; NU], [f64; NU]) {
        let des = self.gait.desired(hs.domain, hs.tau);
        let (mut y, mut yd) = (des.y, des.yd);
        let duration = self.gait.domain(hs.domain).duration;
        let hip = hs.domain.swing_side().hip();
        if hs.domain.is_single_support() {
            apply_offset(&mut y, &mut yd, hip, self.swing_offset, hs.tau, duration);
            if self.cfg.level_swing_foot {
                // ankle angle that cancels the absolute tilt of the shank
                let side = hs.domain.swing_side();
                let (q, qd) = (&hs.state.q, &hs.state.qd);
                let s = |j: usize| model.axis_sign(j);
                let (h, k, a) = (side.hip(), side.knee(), side.ankle());
                let shank = q[2] + s(h) * q[3 + h] + s(k) * q[3 + k];
                let shank_rate = qd[2] + s(h) * qd[3 + h] + s(k) * qd[3 + k];
                y[a] = -s(a) * shank;
                yd[a] = -s(a) * shank_rate;
            }
        } else {
            // a touchdown inside the current tick has not been observed yet
            let offset = if hs.step_index as usize == self.acc.step() {
                self.landed_offset
            } else {
                self.swing_offset
            };
            release_offset(&mut y, &mut yd, hip, offset, hs.tau, duration);
        }
        (y, yd)
    }
}

impl Actuation for Walker {
    fn torques(&self, model: &RobotModel, hs: &HybridState) -> [f64; NU] {
        let (y, yd) = self.desired(model, hs);
        pd_torque(&hs.state.joints(), &hs.state.joint_rates(), &y, &yd, &self.cfg.gains)
    }

    fn external_force(&self, t: f64) -> [f64; 2] {
        let fx = self.pushes.iter().filter(|p| p.active(t)).map(|p| p.force).sum();
        [fx, 0.0]
    }
}
