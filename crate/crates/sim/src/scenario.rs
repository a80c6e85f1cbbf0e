//! Scenario definitions and their resolution into runnable inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strider_core::control::{ChannelConfig, NetworkConfig, PdGains, RegulatorMode};
use strider_core::estimation::{NoiseModel, VelocityWindow};
use strider_core::gait::{synthesize_gait, Gait, SynthParams};
use strider_core::hybrid::Integrator;
use strider_core::lateral::LateralConfig;
use strider_core::model::RobotModel;
use strider_core::walker::{Push, WalkerConfig};

use crate::formats::{read_gait, read_model, resolve, FormatError, Source};

/// Mass the quoted perturbation magnitudes refer to, kg.
pub const REFERENCE_MASS: f64 = 135.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Plant {
    #[default]
    Biped,
    LateralLip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbations {
    /// kg added to the torso/pelvis link of the simulated plant.
    pub pelvis_mass_delta: f64,
    /// m, forward shift of the torso/pelvis COM.
    pub pelvis_com_offset_x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Activation {
    /// s
    pub x: f64,
    /// s
    pub y: f64,
}

impl Default for Activation {
    fn default() -> Self {
        Self { x: 20.0, y: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub network_x: u64,
    pub network_y: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            network_x: 1,
            network_y: 2,
            noise: 7,
        }
    }
}

/// Controller settings that are not scenario protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub gains: PdGains,
    /// Sagittal channel gains; its activation time comes from the scenario.
    pub sagittal: ChannelConfig,
    /// Sagittal network; its seed comes from the scenario.
    pub network: NetworkConfig,
    pub window: VelocityWindow,
    pub level_swing_foot: bool,
    pub integrator: Integrator,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let w = WalkerConfig::default();
        Self {
            gains: w.gains,
            sagittal: w.sagittal,
            network: w.network,
            window: w.window,
            level_swing_foot: w.level_swing_foot,
            integrator: Integrator::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub id: String,
    pub plant: Plant,
    /// Synthesis model; the built-in desk plant when absent.
    pub model: Option<PathBuf>,
    /// Gait file; synthesized from the model at `design_speed` when absent.
    pub gait: Option<PathBuf>,
    /// m/s; used only when the gait is synthesized.
    pub design_speed: f64,
    pub mode: RegulatorMode,
    /// m/s
    pub v_des: f64,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
    pub perturbations: Perturbations,
    pub pushes: Vec<Push>,
    pub activation: Activation,
    pub noise: Option<Source<NoiseModel>>,
    pub seeds: Seeds,
    pub controller: Option<Source<ControllerConfig>>,
    /// Lateral toy settings for `plant = lateral_lip`.
    pub lateral: Option<Source<LateralConfig>>,
    /// Sliding RMS window, steps.
    pub rms_window: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            id: "scenario".to_string(),
            plant: Plant::Biped,
            model: None,
            gait: None,
            design_speed: 0.15,
            mode: RegulatorMode::None,
            v_des: 0.15,
            duration: 60.0,
            dt: 1e-3,
            perturbations: Perturbations::default(),
            pushes: Vec::new(),
            activation: Activation::default(),
            noise: None,
            seeds: Seeds::default(),
            controller: None,
            lateral: None,
            rms_window: 10,
        }
    }
}

/// Everything a biped rollout needs, with files loaded.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub scenario: Scenario,
    /// Model the gait was designed for.
    pub synthesis_model: RobotModel,
    /// Simulated plant with the perturbations applied.
    pub plant: RobotModel,
    pub gait: Gait,
    pub walker: WalkerConfig,
    pub integrator: Integrator,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("scenario id must not be empty".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt must be positive".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err("duration must be positive".into());
        }
        if !self.v_des.is_finite() || !(self.design_speed > 0.0) {
            return Err("v_des must be finite and design_speed positive".into());
        }
        if self.rms_window == 0 {
            return Err("rms_window must be at least 1".into());
        }
        let p = self.perturbations;
        if !p.pelvis_mass_delta.is_finite() || !p.pelvis_com_offset_x.is_finite() {
            return Err("perturbations must be finite".into());
        }
        for push in &self.pushes {
            if !(push.duration >= 0.0) || !push.force.is_finite() || !push.t_start.is_finite() {
                return Err("push windows need finite start/force and non-negative duration".into());
            }
        }
        Ok(())
    }

    /// Loads referenced files relative to `base` and builds the plant and
    /// controller. The gait is built from the unperturbed model.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, FormatError> {
        let here = base.join("<scenario>");
        self.validate().map_err(|e| FormatError::invalid(&here, e))?;
        let synthesis_model = match &self.model {
            Some(p) => read_model(&resolve(base, p))?,
            None => RobotModel::planar_biped(),
        };
        let gait = match &self.gait {
            Some(p) => {
                let path = resolve(base, p);
                let g = read_gait(&path)?;
                if g.model_fingerprint != synthesis_model.fingerprint() {
                    return Err(FormatError::invalid(&path, "gait was synthesized for a different model"));
                }
                g
            }
            None => synthesize_gait(&synthesis_model, &SynthParams::for_speed(self.design_speed))
                .map_err(|e| FormatError::invalid(&here, e))?,
        };
        let plant = synthesis_model
            .with_pelvis_mass_delta(self.perturbations.pelvis_mass_delta)
            .with_pelvis_com_offset(self.perturbations.pelvis_com_offset_x);
        plant.validate().map_err(|e| FormatError::invalid(&here, e))?;
        let ctrl = match &self.controller {
            Some(s) => s.load(base)?,
            None => ControllerConfig::default(),
        };
        let mut noise = match &self.noise {
            Some(s) => s.load(base)?,
            None => NoiseModel::default(),
        };
        noise.seed = self.seeds.noise;
        let mut sagittal = ctrl.sagittal;
        sagittal.activation_time = self.activation.x;
        let mut network = ctrl.network.clone();
        network.seed = self.seeds.network_x;
        let walker = WalkerConfig {
            gains: ctrl.gains,
            mode: self.mode,
            v_des: self.v_des,
            sagittal,
            network,
            window: ctrl.window,
            noise,
            level_swing_foot: ctrl.level_swing_foot,
        };
        Ok(Resolved {
            scenario: self.clone(),
            synthesis_model,
            plant,
            gait,
            walker,
            integrator: ctrl.integrator,
        })
    }

    /// Lateral toy settings with the scenario's activation, seed and duration
    /// applied. The lateral target speed stays in the lateral settings.
    pub fn lateral_config(&self, base: &Path) -> Result<LateralConfig, FormatError> {
        let here = base.join("<scenario>");
        self.validate().map_err(|e| FormatError::invalid(&here, e))?;
        let mut cfg = match &self.lateral {
            Some(s) => s.load(base)?,
            None => LateralConfig::default(),
        };
        cfg.channel.activation_time = self.activation.y;
        cfg.network.seed = self.seeds.network_y;
        cfg.steps = ((self.duration / cfg.step_time) + 1e-9).floor() as usize;
        cfg.validate().map_err(|e| FormatError::invalid(&here, e))?;
        Ok(cfg)
    }
}

/// Scales a force or mass from the 135 kg reference to `plant_mass`.
pub fn scale_to_plant(value: f64, plant_mass: f64) -> f64 {
    value * plant_mass / REFERENCE_MASS
}
