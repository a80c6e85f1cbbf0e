//! Scenario execution: biped rollouts and the lateral LIP toy.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use strider_core::control::RegulatorMode;
use strider_core::hybrid::{advance, detect_fall, guard_value, DomainId, HybridConfig, HybridState};
use strider_core::lateral::run_lateral;
use strider_core::model::{NQ, NU};
use strider_core::walker::Walker;

use crate::formats::{write_json, FormatError};
use crate::metrics::{first_step_at, recovery_steps, rms_error, tail_mean};
use crate::scenario::{Plant, Resolved, Scenario};

/// Trace layout version, bumped whenever the column set changes.
pub const TRACE_VERSION: u32 = 1;

/// Steps averaged for the final mean speed.
pub const FINAL_STEPS: usize = 10;

/// Recovery band as a fraction of the target speed.
pub const RECOVERY_BAND: f64 = 0.10;

/// Consecutive in-band steps that count as recovered.
pub const RECOVERY_HOLD: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("controller setup: {0}")]
    Setup(String),
    #[error("trace output: {0}")]
    Trace(#[from] csv::Error),
}

impl RunError {
    /// Whether the failure is a rejected input rather than an IO problem.
    pub fn is_validation(&self) -> bool {
        match self {
            RunError::Format(FormatError::Io { .. }) | RunError::Trace(_) => false,
            RunError::Format(_) | RunError::Setup(_) => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushRecovery {
    pub t_start: f64,
    pub force: f64,
    /// Steps after the push ends until the speed holds inside the band.
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub trace_version: u32,
    pub plant: Plant,
    pub mode: RegulatorMode,
    pub v_des: f64,
    pub fell: bool,
    pub fall_reason: Option<String>,
    /// s; time of the fall, or the end of the run.
    pub t_end: f64,
    pub steps: usize,
    pub step_times: Vec<f64>,
    pub v: Vec<f64>,
    pub rms_window: usize,
    pub rms: Vec<f64>,
    pub dq: Vec<f64>,
    pub psi: Vec<f64>,
    pub final_mean_speed: Option<f64>,
    pub final_rms: Option<f64>,
    pub recovery: Vec<PushRecovery>,
}

impl RunSummary {
    fn new(sc: &Scenario, v_des: f64) -> Self {
        Self {
            id: sc.id.clone(),
            trace_version: TRACE_VERSION,
            plant: sc.plant,
            mode: sc.mode,
            v_des,
            fell: false,
            fall_reason: None,
            t_end: 0.0,
            steps: 0,
            step_times: Vec::new(),
            v: Vec::new(),
            rms_window: sc.rms_window,
            rms: Vec::new(),
            dq: Vec::new(),
            psi: Vec::new(),
            final_mean_speed: None,
            final_rms: None,
            recovery: Vec::new(),
        }
    }

    fn finish(&mut self, sc: &Scenario) {
        self.steps = self.v.len();
        self.rms = rms_error(&self.v, self.v_des, self.rms_window);
        self.final_mean_speed = tail_mean(&self.v, FINAL_STEPS);
        self.final_rms = self.rms.last().copied();
        let band = RECOVERY_BAND * self.v_des.abs();
        self.recovery = sc
            .pushes
            .iter()
            .map(|p| PushRecovery {
                t_start: p.t_start,
                force: p.force,
                steps: first_step_at(&self.step_times, p.t_start + p.duration)
                    .and_then(|k| recovery_steps(&self.v, k, self.v_des, band, RECOVERY_HOLD)),
            })
            .collect();
    }

    /// Index of the first step at or after `t`.
    pub fn step_at(&self, t: f64) -> Option<usize> {
        first_step_at(&self.step_times, t)
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["t", "domain", "tau", "step"].iter().map(|s| s.to_string()).collect();
    h.extend((0..NQ).map(|i| format!("q{i}")));
    h.extend((0..NQ).map(|i| format!("qd{i}")));
    h.extend((0..NU).map(|i| format!("u{i}")));
    h.extend(["v_x", "v_k", "dq_x", "psi_x", "guard"].iter().map(|s| s.to_string()));
    h
}

/// Runs a biped scenario, streaming one trace row per control tick to
/// `trace`. A fall ends the run early and is reported in the summary.
pub fn run_biped<W: Write>(r: &Resolved, trace: Option<&mut csv::Writer<W>>) -> Result<RunSummary, RunError> {
    let sc = &r.scenario;
    let mut walker =
        Walker::new(r.gait.clone(), r.walker.clone(), sc.pushes.clone()).map_err(|e| RunError::Setup(e.to_string()))?;
    let init = r
        .gait
        .initial_state(&r.synthesis_model)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let cycle = r.gait.cycle();
    let hcfg = HybridConfig {
        integrator: r.integrator,
        ..Default::default()
    };
    let mut hs = HybridState::new(&r.plant, DomainId::LeftSS, init);
    let mut summary = RunSummary::new(sc, r.walker.v_des);
    let mut trace = trace;
    if let Some(w) = trace.as_deref_mut() {
        w.write_record(header())?;
    }
    let ticks = (sc.duration / sc.dt).round() as usize;
    let mut row: Vec<String> = Vec::with_capacity(4 + 2 * NQ + NU + 5);
    for _ in 0..ticks {
        let step = match advance(&r.plant, &cycle, &hs, &walker, sc.dt, &hcfg) {
            Ok(a) => a,
            Err(e) => {
                summary.fell = true;
                summary.fall_reason = Some(e.to_string());
                break;
            }
        };
        hs = step.state;
        match walker.observe(&hs, step.transition.as_ref()) {
            Ok(Some(rec)) => {
                summary.step_times.push(rec.t);
                summary.v.push(rec.v);
                summary.dq.push(rec.output.offset);
                summary.psi.push(rec.output.psi);
            }
            Ok(None) => {}
            Err(e) => {
                summary.fell = true;
                summary.fall_reason = Some(e.to_string());
                break;
            }
        }
        if let Some(w) = trace.as_deref_mut() {
            row.clear();
            row.push(hs.t.to_string());
            row.push(hs.domain.name().to_string());
            row.push(hs.tau.to_string());
            row.push(hs.step_index.to_string());
            row.extend(hs.state.q.iter().map(f64::to_string));
            row.extend(hs.state.qd.iter().map(f64::to_string));
            row.extend(step.torques.iter().map(f64::to_string));
            row.push(hs.state.qd[0].to_string());
            row.push(walker.latest().map(|rec| rec.v.to_string()).unwrap_or_default());
            row.push(walker.swing_offset().to_string());
            row.push(walker.latest().map(|rec| rec.output.psi.to_string()).unwrap_or_default());
            row.push(guard_value(hs.domain, &r.plant, &hs).to_string());
            w.write_record(&row)?;
        }
        if detect_fall(&r.plant, &hs.state) {
            summary.fell = true;
            summary.fall_reason = Some("torso pitch or pelvis height left the walking range".into());
            break;
        }
    }
    summary.t_end = hs.t;
    if let Some(w) = trace {
        w.flush().map_err(csv::Error::from)?;
    }
    summary.finish(sc);
    Ok(summary)
}

/// Runs the lateral LIP toy described by the scenario, one trace row per step.
pub fn run_lateral_toy<W: Write>(
    sc: &Scenario,
    base: &Path,
    trace: Option<&mut csv::Writer<W>>,
) -> Result<RunSummary, RunError> {
    let cfg = sc.lateral_config(base)?;
    let run = run_lateral(&cfg, sc.mode).map_err(|e| RunError::Setup(e.to_string()))?;
    let mut summary = RunSummary::new(sc, cfg.v_des);
    if let Some(w) = trace {
        w.write_record(["step", "t", "v_y", "dq_y", "psi_y", "error", "y", "foot"])?;
        for s in &run.steps {
            w.write_record([
                s.step.to_string(),
                s.t.to_string(),
                s.v.to_string(),
                s.offset.to_string(),
                s.psi.to_string(),
                s.error.to_string(),
                s.y.to_string(),
                s.foot.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    summary.fell = run.fell;
    if run.fell {
        summary.fall_reason = Some(format!("lateral position left ±{} m", cfg.bound));
    }
    summary.t_end = run.steps.last().map_or(0.0, |s| s.t);
    for s in &run.steps {
        summary.step_times.push(s.t);
        summary.v.push(s.v);
        summary.dq.push(s.offset);
        summary.psi.push(s.psi);
    }
    summary.finish(sc);
    Ok(summary)
}

/// Runs either plant, writing `trace.csv` and `summary.json` into `out`.
pub fn run_scenario(sc: &Scenario, base: &Path, out: &Path) -> Result<RunSummary, RunError> {
    fs::create_dir_all(out).map_err(|source| FormatError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    // resolve before touching the trace so bad inputs leave no partial files
    let resolved = match sc.plant {
        Plant::Biped => Some(sc.resolve(base)?),
        Plant::LateralLip => {
            sc.lateral_config(base)?;
            None
        }
    };
    let trace_path = out.join("trace.csv");
    let file = File::create(&trace_path).map_err(|source| FormatError::Io {
        path: trace_path.clone(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let summary = match &resolved {
        Some(r) => run_biped(r, Some(&mut w))?,
        None => run_lateral_toy(sc, base, Some(&mut w))?,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Runs a scenario without writing anything.
pub fn simulate(sc: &Scenario, base: &Path) -> Result<RunSummary, RunError> {
    match sc.plant {
        Plant::Biped => run_biped::<std::io::Sink>(&sc.resolve(base)?, None),
        Plant::LateralLip => run_lateral_toy::<std::io::Sink>(sc, base, None),
    }
}
