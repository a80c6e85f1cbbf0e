//! Per-step speed measurement and optional sensor noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::RAMP_START;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VelocityWindow {
    /// Mean over every tick from step start to the freeze tick.
    HalfStep,
    /// The single sample at the freeze tick.
    Instant,
    /// Mean over every tick since the previous freeze, i.e. one full step
    /// period ending at mid-swing.
    #[default]
    FullStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EstimationError {
    #[error("empty averaging window")]
    EmptyWindow,
}

/// Running pelvis-speed average for the current step, frozen once at
/// mid-swing.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityAccumulator {
    window: VelocityWindow,
    sum: f64,
    count: usize,
    last: f64,
    step: usize,
    frozen: Option<f64>,
}

impl VelocityAccumulator {
    pub fn new(window: VelocityWindow, step: usize) -> Self {
        Self {
            window,
            sum: 0.0,
            count: 0,
            last: 0.0,
            step,
            frozen: None,
        }
    }

    /// Starts a new step. Half-step and instant windows discard their
    /// samples; a full-step window keeps the samples taken since the last
    /// freeze.
    pub fn reset(&mut self, step: usize) {
        if self.window == VelocityWindow::FullStep {
            self.step = step;
            self.frozen = None;
        } else {
            *self = Self::new(self.window, step);
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn frozen(&self) -> Option<f64> {
        self.frozen
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds one sample. Once the step's value is frozen, samples only count
    /// towards the next full-step window.
    pub fn accumulate(&mut self, v: f64) {
        if self.frozen.is_none() || self.window == VelocityWindow::FullStep {
            self.sum += v;
            self.count += 1;
            self.last = v;
        }
    }

    /// Freezes the step's value. A second call returns the same value.
    pub fn freeze(&mut self) -> Result<f64, EstimationError> {
        if let Some(v) = self.frozen {
            return Ok(v);
        }
        if self.count == 0 {
            return Err(EstimationError::EmptyWindow);
        }
        let v = match self.window {
            VelocityWindow::HalfStep | VelocityWindow::FullStep => self.sum / self.count as f64,
            VelocityWindow::Instant => self.last,
        };
        self.frozen = Some(v);
        if self.window == VelocityWindow::FullStep {
            self.sum = 0.0;
            self.count = 0;
        }
        Ok(v)
    }

    /// Whether a tick at `tau` in a single-support domain should freeze.
    pub fn due(&self, single_support: bool, tau: f64) -> bool {
        self.frozen.is_none() && single_support && tau >= RAMP_START
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub enabled: bool,
    /// m/s
    pub velocity_std: f64,
    /// rad
    pub orientation_std: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            enabled: false,
            velocity_std: 0.01,
            orientation_std: 0.005,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Measurement {
    /// m/s
    pub vx: f64,
    /// rad
    pub pitch: f64,
}

/// Seeded Gaussian corruption of the true pelvis speed and torso pitch.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    model: NoiseModel,
    rng: ChaCha8Rng,
    velocity: Option<Normal<f64>>,
    orientation: Option<Normal<f64>>,
}

impl NoiseSource {
    pub fn new(model: NoiseModel) -> Self {
        let dist = |std: f64| (model.enabled && std > 0.0).then(|| Normal::new(0.0, std).expect("finite std"));
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            velocity: dist(model.velocity_std),
            orientation: dist(model.orientation_std),
        }
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn measure(&mut self, vx: f64, pitch: f64) -> Measurement {
        if !self.model.enabled {
            return Measurement { vx, pitch };
        }
        let dv = self.velocity.map_or(0.0, |d| d.sample(&mut self.rng));
        let dp = self.orientation.map_or(0.0, |d| d.sample(&mut self.rng));
        Measurement {
            vx: vx + dv,
            pitch: pitch + dp,
        }
    }
}
