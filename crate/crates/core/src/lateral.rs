//! Lateral linear-inverted-pendulum toy plant driven by the lateral
//! regulator channel.
//!
//! The centre of mass moves at constant height `h0` over a point foot. A
//! constant lateral force acts throughout. Each step lasts `step_time`; at
//! the end of a step the next foot is placed a nominal half-width to the
//! opposite side of the centre of mass, shifted by `-lever * δq_y`. A
//! positive offset therefore moves the foot towards `-y`, which speeds the
//! mass up towards `+y`, the same sign convention as the sagittal channel.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::control::{ChannelConfig, ChannelId, ControlError, NetworkConfig, NeuralApproximator, RegulatorChannel, RegulatorMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LateralConfig {
    /// m
    pub height: f64,
    /// m/s²
    pub gravity: f64,
    /// s
    pub step_time: f64,
    /// Nominal lateral foot distance from the centre of mass at a step, m.
    pub half_width: f64,
    /// m per rad
    pub lever: f64,
    /// kg
    pub mass: f64,
    /// N, constant, positive towards +y.
    pub bias_force: f64,
    /// m/s
    pub v_des: f64,
    pub steps: usize,
    /// Fall threshold on the distance between mass and stance foot, m.
    pub bound: f64,
    pub channel: ChannelConfig,
    pub network: NetworkConfig,
}

impl Default for LateralConfig {
    fn default() -> Self {
        Self {
            height: 0.8,
            gravity: 9.81,
            step_time: 0.3,
            half_width: 0.1,
            lever: 0.2,
            mass: 36.0,
            bias_force: 3.0,
            v_des: 0.0,
            steps: 200,
            bound: 0.5,
            channel: ChannelConfig {
                kp: 1.0,
                kd: 0.0,
                k_adaptive: 2.0,
                activation_time: 0.0,
                ..ChannelConfig::default()
            },
            network: NetworkConfig {
                seed: 2,
                ..NetworkConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LateralError {
    #[error("lateral config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Control(#[from] ControlError),
}

impl LateralConfig {
    pub fn validate(&self) -> Result<(), LateralError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.height) || !pos(self.gravity) || !pos(self.step_time) || !pos(self.mass) || !pos(self.bound) {
            return Err(LateralError::Config("height, gravity, step time, mass and bound must be positive"));
        }
        if !self.half_width.is_finite() || !self.lever.is_finite() || !self.bias_force.is_finite() || !self.v_des.is_finite() {
            return Err(LateralError::Config("half width, lever, bias force and v_des must be finite"));
        }
        if self.steps == 0 {
            return Err(LateralError::Config("need at least one step"));
        }
        self.channel.validate()?;
        Ok(())
    }

    /// Pendulum frequency, 1/s.
    pub fn omega(&self) -> f64 {
        libm::sqrt(self.gravity / self.height)
    }

    /// Equivalent static shift of the foot caused by the bias force, m.
    pub fn bias_shift(&self) -> f64 {
        self.bias_force / self.mass / (self.omega() * self.omega())
    }
}

/// Centre of mass relative to the stance foot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipState {
    /// m
    pub x: f64,
    /// m/s
    pub v: f64,
}

/// Exact propagation of `ẍ = ω² x + a` over `dt`, with `shift = a / ω²`.
pub fn lip_propagate(s: LipState, omega: f64, dt: f64, shift: f64) -> LipState {
    let (c, sh) = (libm::cosh(omega * dt), libm::sinh(omega * dt));
    let xs = s.x + shift;
    LipState {
        x: xs * c + s.v * sh / omega - shift,
        v: xs * omega * sh + s.v * c,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LateralStep {
    pub step: usize,
    /// End of the step, s.
    pub t: f64,
    /// Mean lateral speed over the step, m/s.
    pub v: f64,
    /// rad
    pub offset: f64,
    /// rad
    pub psi: f64,
    /// m/s
    pub error: f64,
    /// Absolute centre-of-mass position at the end of the step, m.
    pub y: f64,
    /// Absolute position of the foot placed for the next step, m.
    pub foot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LateralRun {
    pub mode: RegulatorMode,
    pub fell: bool,
    pub steps: Vec<LateralStep>,
}

impl LateralRun {
    pub fn speeds(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.v).collect()
    }

    /// Mean of `|v_des - v|` over the last `n` steps.
    pub fn mean_abs_error(&self, n: usize) -> f64 {
        let tail = &self.steps[self.steps.len().saturating_sub(n)..];
        tail.iter().map(|s| libm::fabs(s.error)).sum::<f64>() / tail.len().max(1) as f64
    }

    /// Mean of `v` over the last `n` steps.
    pub fn mean_speed(&self, n: usize) -> f64 {
        let tail = &self.steps[self.steps.len().saturating_sub(n)..];
        tail.iter().map(|s| s.v).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Starting state on the undisturbed symmetric orbit, left foot in stance.
pub fn symmetric_start(cfg: &LateralConfig) -> LipState {
    let w = cfg.omega();
    LipState {
        x: -cfg.half_width,
        v: cfg.half_width * w * libm::tanh(w * cfg.step_time / 2.0),
    }
}

pub fn run_lateral(cfg: &LateralConfig, mode: RegulatorMode) -> Result<LateralRun, LateralError> {
    cfg.validate()?;
    let mut nn = NeuralApproximator::new(&cfg.network)?;
    let mut channel = RegulatorChannel::new(ChannelId::Lateral, cfg.channel, mode);
    let (w, t_step, shift) = (cfg.omega(), cfg.step_time, cfg.bias_shift());
    let mut s = symmetric_start(cfg);
    let mut foot = 0.0;
    // +1 while the left foot (at +y of the mass) is in stance
    let mut side = 1.0;
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut fell = false;
    for k in 0..cfg.steps {
        let end = lip_propagate(s, w, t_step, shift);
        let v = (end.x - s.x) / t_step;
        let t = (k + 1) as f64 * t_step;
        let out = channel.step(&mut nn, v, cfg.v_des, 0.0, t);
        let y = foot + end.x;
        side = -side;
        let x_next = -side * cfg.half_width + cfg.lever * out.offset;
        foot = y - x_next;
        steps.push(LateralStep {
            step: k,
            t,
            v,
            offset: out.offset,
            psi: out.psi,
            error: out.error,
            y,
            foot,
        });
        s = LipState { x: x_next, v: end.v };
        if !(libm::fabs(end.x) <= cfg.bound && libm::fabs(s.x) <= cfg.bound) {
            fell = true;
            break;
        }
    }
    Ok(LateralRun { mode, fell, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_matches_fine_integration() {
        let (w, dt, shift) = (3.5, 0.3, 0.01);
        let s0 = LipState { x: -0.08, v: 0.3 };
        let exact = lip_propagate(s0, w, dt, shift);
        // classical RK4 on the same ODE
        let n = 3000;
        let h = dt / n as f64;
        let f = |x: f64, v: f64| (v, w * w * (x + shift));
        let (mut x, mut v) = (s0.x, s0.v);
        for _ in 0..n {
            let (a1, b1) = f(x, v);
            let (a2, b2) = f(x + h / 2.0 * a1, v + h / 2.0 * b1);
            let (a3, b3) = f(x + h / 2.0 * a2, v + h / 2.0 * b2);
            let (a4, b4) = f(x + h * a3, v + h * b3);
            x += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        assert!((exact.x - x).abs() < 1e-12 && (exact.v - v).abs() < 1e-12);
    }

    #[test]
    fn propagation_composes() {
        let s0 = LipState { x: 0.05, v: -0.2 };
        let a = lip_propagate(lip_propagate(s0, 3.0, 0.1, 0.02), 3.0, 0.2, 0.02);
        let b = lip_propagate(s0, 3.0, 0.3, 0.02);
        assert!((a.x - b.x).abs() < 1e-14 && (a.v - b.v).abs() < 1e-14);
    }

    #[test]
    fn undisturbed_orbit_keeps_offset_small() {
        let cfg = LateralConfig {
            bias_force: 0.0,
            ..Default::default()
        };
        for mode in [RegulatorMode::Heuristic, RegulatorMode::Adaptive] {
            let run = run_lateral(&cfg, mode).unwrap();
            assert!(!run.fell);
            assert!(run.steps.iter().all(|s| s.offset.abs() < 1e-12 && s.v.abs() < 1e-12));
            assert!(run.steps.iter().all(|s| (s.y - run.steps[0].y).abs() < 0.25));
        }
    }

    #[test]
    fn learning_off_matches_heuristic() {
        let mut cfg = LateralConfig::default();
        let h = run_lateral(&cfg, RegulatorMode::Heuristic).unwrap();
        cfg.channel.learning = false;
        let a = run_lateral(&cfg, RegulatorMode::Adaptive).unwrap();
        assert_eq!(h.steps, a.steps);
    }

    #[test]
    fn open_loop_diverges() {
        let run = run_lateral(&LateralConfig::default(), RegulatorMode::None).unwrap();
        assert!(run.fell);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = LateralConfig {
            step_time: 0.0,
            ..Default::default()
        };
        assert!(run_lateral(&cfg, RegulatorMode::Heuristic).is_err());
    }
}
