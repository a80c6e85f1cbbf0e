//! Joint-level PD tracking, per-step foot-placement regulation and the
//! online-trained neural compensator.

use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::NU;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    /// N·m/rad
    pub kp: [f64; NU],
    /// N·m·s/rad
    pub kd: [f64; NU],
    /// N·m
    pub u_max: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: [4000.0, 4000.0, 1000.0, 4000.0, 4000.0, 1000.0],
            kd: [60.0, 60.0, 8.0, 60.0, 60.0, 8.0],
            u_max: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("gains must be finite and non-negative, u_max positive")]
    Gains,
    #[error("network needs at least one input and one hidden unit, positive input scales and init std")]
    Network,
    #[error("update sign must be +1 or -1")]
    Sign,
    #[error("offset limit must be positive")]
    OffsetLimit,
}

impl PdGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.kp.iter().chain(&self.kd).all(|g| g.is_finite() && *g >= 0.0)
            && self.u_max > 0.0
            && self.u_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ControlError::Gains)
        }
    }
}

/// `u = -Kp (q - y_d) - Kd (qd - yd_d)`, clamped element-wise to `±u_max`.
pub fn pd_torque(q: &[f64; NU], qd: &[f64; NU], y_d: &[f64; NU], yd_d: &[f64; NU], gains: &PdGains) -> [f64; NU] {
    let mut u = [0.0; NU];
    for j in 0..NU {
        let raw = -gains.kp[j] * (q[j] - y_d[j]) - gains.kd[j] * (qd[j] - yd_d[j]);
        u[j] = raw.clamp(-gains.u_max, gains.u_max);
    }
    u
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// One hidden layer of fixed random sigmoid features with a learned linear
/// read-out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralApproximator {
    n_in: usize,
    hidden: usize,
    /// Row-major `(n_in + 1) x hidden`; the last row multiplies the bias input.
    v: Vec<f64>,
    w: Vec<f64>,
    scales: Vec<f64>,
    pub gamma: f64,
    seed: u64,
}

/// Construction parameters for a [`NeuralApproximator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub scales: Vec<f64>,
    pub gamma: f64,
    pub seed: u64,
    /// Standard deviation of the fixed input weights.
    pub init_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 1000,
            scales: alloc::vec![1.0, 0.5, 0.5],
            gamma: 1e-4,
            seed: 1,
            init_std: 1.0,
        }
    }
}

impl NeuralApproximator {
    pub fn new(cfg: &NetworkConfig) -> Result<Self, ControlError> {
        let n_in = cfg.scales.len();
        let bad_scale = cfg.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite());
        if n_in == 0 || cfg.hidden == 0 || bad_scale || !(cfg.init_std > 0.0) || !cfg.init_std.is_finite() {
            return Err(ControlError::Network);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let v = (0..(n_in + 1) * cfg.hidden)
            .map(|_| cfg.init_std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        Ok(Self {
            n_in,
            hidden: cfg.hidden,
            v,
            w: alloc::vec![0.0; cfg.hidden],
            scales: cfg.scales.clone(),
            gamma: cfg.gamma,
            seed: cfg.seed,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn set_weights(&mut self, w: &[f64]) {
        assert_eq!(w.len(), self.hidden, "weight vector length");
        self.w.copy_from_slice(w);
    }

    pub fn input_weights(&self) -> &[f64] {
        &self.v
    }

    /// Hidden activations for raw (unnormalized) inputs.
    pub fn features(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.n_in, "input dimension");
        let mut x = Vec::with_capacity(self.n_in + 1);
        x.extend(raw.iter().zip(&self.scales).map(|(r, s)| r / s));
        x.push(1.0);
        let mut z = alloc::vec![0.0; self.hidden];
        for (i, xi) in x.iter().enumerate() {
            let row = &self.v[i * self.hidden..(i + 1) * self.hidden];
            for (zj, vij) in z.iter_mut().zip(row) {
                *zj += vij * xi;
            }
        }
        z.into_iter().map(sigmoid).collect()
    }

    /// Read-out `Wᵀh` and the activations `h`.
    pub fn forward(&self, raw: &[f64]) -> (f64, Vec<f64>) {
        let h = self.features(raw);
        (self.output(&h), h)
    }

    pub fn output(&self, h: &[f64]) -> f64 {
        crate::linalg::dot(&self.w, h)
    }

    /// Delta rule `W += sign * (-γ E h)`. Returns whether the update ran; a
    /// non-finite error is skipped.
    pub fn update(&mut self, h: &[f64], error: f64, sign: f64) -> bool {
        if !error.is_finite() {
            log::warn!("skipping weight update for non-finite error {error}");
            return false;
        }
        let step = -sign * self.gamma * error;
        for (w, hi) in self.w.iter_mut().zip(h) {
            *w += step * hi;
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelId {
    Sagittal,
    Lateral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegulatorMode {
    #[default]
    None,
    Heuristic,
    Adaptive,
}

/// Gains and limits for one regulation channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// rad per m/s
    pub kp: f64,
    /// rad per m/s
    pub kd: f64,
    /// Adaptive gain, rad.
    pub k_adaptive: f64,
    /// s
    pub activation_time: f64,
    /// rad
    pub dq_max: f64,
    /// Delta-rule sign; -1 reduces |E| when the offset raises the speed.
    pub sign: f64,
    /// Train the network online in adaptive mode.
    pub learning: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            kp: 0.3,
            kd: 0.0,
            k_adaptive: 10.0,
            activation_time: 20.0,
            dq_max: 0.3,
            sign: -1.0,
            learning: true,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !self.kp.is_finite() || !self.kd.is_finite() || !self.k_adaptive.is_finite() {
            return Err(ControlError::Gains);
        }
        if !(self.dq_max > 0.0) {
            return Err(ControlError::OffsetLimit);
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(ControlError::Sign);
        }
        Ok(())
    }
}

/// Per-rollout state of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RegulatorChannel {
    pub id: ChannelId,
    pub config: ChannelConfig,
    pub mode: RegulatorMode,
    /// Current offset, rad.
    pub offset: f64,
    /// Previous step's measured speed, m/s.
    pub v_prev: Option<f64>,
}

/// What one regulator step produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegulatorOutput {
    /// rad
    pub offset: f64,
    /// Adaptive term `k Wᵀh` before the update, rad.
    pub psi: f64,
    /// Velocity error `v_d - v`, m/s.
    pub error: f64,
    pub active: bool,
    pub learned: bool,
}

impl RegulatorChannel {
    pub fn new(id: ChannelId, config: ChannelConfig, mode: RegulatorMode) -> Self {
        Self {
            id,
            config,
            mode,
            offset: 0.0,
            v_prev: None,
        }
    }

    /// Runs once per step after the speed measurement. `orientation` is the
    /// torso angle fed to the network alongside the speed and its error.
    pub fn step(
        &mut self,
        nn: &mut NeuralApproximator,
        v: f64,
        v_des: f64,
        orientation: f64,
        t: f64,
    ) -> RegulatorOutput {
        let c = self.config;
        let error = v_des - v;
        let active = self.mode != RegulatorMode::None && t >= c.activation_time;
        let mut out = RegulatorOutput {
            error,
            active,
            ..Default::default()
        };
        if active {
            let deriv = self.v_prev.map_or(0.0, |vp| c.kd * (v - vp));
            let mut dq = c.kp * error + deriv;
            if self.mode == RegulatorMode::Adaptive {
                let (raw, h) = nn.forward(&[v, orientation, error]);
                out.psi = c.k_adaptive * raw;
                dq += out.psi;
                if c.learning {
                    out.learned = nn.update(&h, error, c.sign);
                }
            }
            self.offset = dq.clamp(-c.dq_max, c.dq_max);
        } else {
            self.offset = 0.0;
        }
        out.offset = self.offset;
        self.v_prev = Some(v);
        out
    }
}

/// Smooth 0→1 ramp over `[start, end]` and its derivative in phase.
pub fn smoothstep(tau: f64, start: f64, end: f64) -> (f64, f64) {
    if tau <= start {
        return (0.0, 0.0);
    }
    if tau >= end {
        return (1.0, 0.0);
    }
    let w = end - start;
    let x = (tau - start) / w;
    (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x) / w)
}

/// Phase at which the per-step speed is measured and the offset ramp starts.
pub const RAMP_START: f64 = 0.5;
pub const RAMP_END: f64 = 0.75;

/// Adds the ramped offset to the swing hip of a single-support output.
pub fn apply_offset(y: &mut [f64; NU], yd: &mut [f64; NU], swing_hip: usize, offset: f64, tau: f64, duration: f64) {
    let (s, ds) = smoothstep(tau, RAMP_START, RAMP_END);
    y[swing_hip] += s * offset;
    yd[swing_hip] += ds * offset / duration;
}

/// Releases an offset left on the just-landed hip over a double support.
pub fn release_offset(y: &mut [f64; NU], yd: &mut [f64; NU], hip: usize, offset: f64, tau: f64, duration: f64) {
    let (s, ds) = smoothstep(tau, 0.0, 1.0);
    y[hip] += (1.0 - s) * offset;
    yd[hip] -= ds * offset / duration;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn net(hidden: usize) -> NeuralApproximator {
        NeuralApproximator::new(&NetworkConfig {
            hidden,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn pd_zero_error_and_pure_proportional() {
        let g = PdGains::default();
        let y = [0.1, -0.3, 0.2, -0.1, -0.2, 0.05];
        let yd = [0.5; NU];
        assert_eq!(pd_torque(&y, &yd, &y, &yd, &g), [0.0; NU]);
        let e = [0.01, -0.02, 0.03, 0.0, 0.04, -0.01];
        let q: [f64; NU] = core::array::from_fn(|j| y[j] + e[j]);
        let u = pd_torque(&q, &yd, &y, &yd, &g);
        for j in 0..NU {
            assert!((u[j] + g.kp[j] * e[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn pd_saturates() {
        let g = PdGains::default();
        let u = pd_torque(&[10.0; NU], &[0.0; NU], &[-10.0; NU], &[0.0; NU], &g);
        assert!(u.iter().all(|v| v.abs() == g.u_max));
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let n = net(50);
        assert_eq!(n.forward(&[0.3, -0.2, 0.9]).0, 0.0);
        assert!(n.features(&[0.3, -0.2, 0.9]).iter().all(|h| *h > 0.0 && *h < 1.0));
    }

    #[test]
    fn delta_rule_hand_value() {
        let mut n = net(4);
        let h = [0.5; 4];
        assert!(n.update(&h, 0.1, -1.0));
        for w in n.weights() {
            assert!((w - 5e-6).abs() < 1e-20);
        }
        let before = n.weights().to_vec();
        n.update(&h, 0.0, -1.0);
        assert_eq!(n.weights(), &before[..]);
        assert!(!n.update(&h, f64::NAN, -1.0));
        assert_eq!(n.weights(), &before[..]);
    }

    #[test]
    fn same_seed_same_features() {
        assert_eq!(net(20).input_weights(), net(20).input_weights());
        let other = NeuralApproximator::new(&NetworkConfig {
            hidden: 20,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(net(20).input_weights(), other.input_weights());
    }

    #[test]
    fn repeated_updates_shrink_error_under_positive_gain() {
        // scalar plant: v = v0 + g * psi, psi = k W·h
        let mut n = net(1000);
        let cfg = ChannelConfig::default();
        let x = [0.1, 0.0, 0.05];
        let (_, h) = n.forward(&x);
        let (g, v0, vd) = (1.0, 0.10, 0.15);
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            let psi = cfg.k_adaptive * n.output(&h);
            let e = vd - (v0 + g * psi);
            assert!(e.abs() < last, "error must strictly shrink");
            last = e.abs();
            n.update(&h, e, cfg.sign);
        }
    }

    #[test]
    fn default_update_is_a_contraction() {
        let n = net(1000);
        let cfg = ChannelConfig::default();
        let (_, h) = n.forward(&[0.15, 0.0, 0.0]);
        let hh: f64 = h.iter().map(|v| v * v).sum();
        let rate = cfg.k_adaptive * 1.0 * n.gamma * hh;
        assert!(rate > 0.0 && rate < 2.0, "k g γ |h|² = {rate}");
    }

    #[test]
    fn regulator_inactive_before_activation() {
        let mut n = net(10);
        let mut ch = RegulatorChannel::new(ChannelId::Sagittal, ChannelConfig::default(), RegulatorMode::Adaptive);
        let out = ch.step(&mut n, 0.1, 0.15, 0.0, 5.0);
        assert_eq!(out.offset, 0.0);
        assert!(!out.learned && !out.active);
        assert!(n.weights().iter().all(|w| *w == 0.0));
        assert_eq!(ch.v_prev, Some(0.1));
    }

    #[test]
    fn regulator_at_target_gives_zero() {
        let mut n = net(10);
        let mut ch = RegulatorChannel::new(ChannelId::Sagittal, ChannelConfig::default(), RegulatorMode::Heuristic);
        ch.v_prev = Some(0.15);
        assert_eq!(ch.step(&mut n, 0.15, 0.15, 0.0, 30.0).offset, 0.0);
    }

    #[test]
    fn offset_ramp_shape() {
        let mut y = [0.0; NU];
        let mut yd = [0.0; NU];
        apply_offset(&mut y, &mut yd, 3, 0.2, 0.4, 0.6);
        assert_eq!((y, yd), ([0.0; NU], [0.0; NU]));
        apply_offset(&mut y, &mut yd, 3, 0.2, 1.0, 0.6);
        assert_eq!(y[3], 0.2);
        assert_eq!(yd[3], 0.0);
        assert!(y.iter().enumerate().all(|(j, v)| j == 3 || *v == 0.0));
    }

    #[test]
    fn ramp_derivative_matches_finite_difference() {
        for tau in [0.55, 0.6, 0.7] {
            let h = 1e-7;
            let fd = (smoothstep(tau + h, 0.5, 0.75).0 - smoothstep(tau - h, 0.5, 0.75).0) / (2.0 * h);
            assert!((fd - smoothstep(tau, 0.5, 0.75).1).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn read_out_is_linear_in_weights(
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            dw in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let mut n = net(16);
            let (before, h) = n.forward(&x);
            n.set_weights(&dw);
            let (after, _) = n.forward(&x);
            let expect: f64 = crate::linalg::dot(&dw, &h);
            prop_assert_eq!(after - before, expect);
        }

        #[test]
        fn heuristic_equals_adaptive_without_learning(
            v in -1.0f64..1.0, vp in -1.0f64..1.0, vd in -1.0f64..1.0, pitch in -0.5f64..0.5,
        ) {
            let cfg = ChannelConfig { kd: 0.1, ..Default::default() };
            let mut n = net(16);
            let mut heur = RegulatorChannel::new(ChannelId::Sagittal, cfg, RegulatorMode::Heuristic);
            let frozen = ChannelConfig { learning: false, ..cfg };
            let mut adap = RegulatorChannel::new(ChannelId::Sagittal, frozen, RegulatorMode::Adaptive);
            heur.v_prev = Some(vp);
            adap.v_prev = Some(vp);
            let a = heur.step(&mut n.clone(), v, vd, pitch, 25.0).offset;
            let b = adap.step(&mut n, v, vd, pitch, 25.0).offset;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn offset_is_clamped(v in -10.0f64..10.0, vd in -10.0f64..10.0) {
            let mut n = net(8);
            n.set_weights(&[50.0; 8]);
            let mut ch = RegulatorChannel::new(ChannelId::Sagittal, ChannelConfig::default(), RegulatorMode::Adaptive);
            let out = ch.step(&mut n, v, vd, 0.0, 30.0);
            prop_assert!(out.offset.abs() <= ChannelConfig::default().dq_max);
        }
    }
}
