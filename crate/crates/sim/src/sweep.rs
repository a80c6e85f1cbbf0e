//! Parameter sweeps over a template scenario.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strider_core::control::RegulatorMode;
use strider_core::model::RobotModel;

use crate::formats::{read_model, resolve, write_json, FormatError, Source};
use crate::run::{run_scenario, simulate, RunSummary};
use crate::scenario::Scenario;

/// Values to vary. Empty axes are left at the template value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Axes {
    pub mode: Vec<RegulatorMode>,
    /// Pelvis mass change as a percentage of the plant's total mass.
    pub mass_delta_pct: Vec<f64>,
    /// Pelvis mass change, kg.
    pub mass_delta: Vec<f64>,
    /// m
    pub com_offset_x: Vec<f64>,
    /// m/s
    pub v_des: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub template: Source<Scenario>,
    pub axes: Axes,
    /// Extra scenarios run as given.
    pub scenarios: Vec<Source<Scenario>>,
    pub parallel: bool,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            template: Source::Inline(Scenario::default()),
            axes: Axes::default(),
            scenarios: Vec::new(),
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub mode: RegulatorMode,
    pub fell: bool,
    pub steps: usize,
    pub final_mean_speed: Option<f64>,
    pub final_rms: Option<f64>,
    /// Set when the run could not be carried out at all.
    pub error: Option<String>,
}

impl ReportRow {
    pub fn from_summary(s: &RunSummary) -> Self {
        Self {
            id: s.id.clone(),
            mode: s.mode,
            fell: s.fell,
            steps: s.steps,
            final_mean_speed: s.final_mean_speed,
            final_rms: s.final_rms,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<ReportRow>,
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    if x >= 0.0 {
        format!("+{s}")
    } else {
        s
    }
}

/// Expands the grid into concrete scenarios, sorted by id.
pub fn expand(grid: &Grid, base: &Path) -> Result<Vec<Scenario>, FormatError> {
    let template = grid.template.load(base)?;
    let mut out = vec![template.clone()];
    let a = &grid.axes;
    if !a.mode.is_empty() {
        out = out
            .into_iter()
            .flat_map(|s| {
                a.mode.iter().map(move |&m| {
                    let name = serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_owned));
                    Scenario {
                        id: format!("{}-{}", s.id, name.unwrap_or_default()),
                        mode: m,
                        ..s.clone()
                    }
                })
            })
            .collect();
    }
    if !a.mass_delta_pct.is_empty() {
        let model = match &template.model {
            Some(p) => read_model(&resolve(base, p))?,
            None => RobotModel::planar_biped(),
        };
        let total = model.total_mass();
        out = out
            .into_iter()
            .flat_map(|s| {
                a.mass_delta_pct.iter().map(move |&pct| {
                    let mut s2 = s.clone();
                    s2.id = format!("{}-mass{}pct", s.id, fmt_num(pct));
                    s2.perturbations.pelvis_mass_delta += pct / 100.0 * total;
                    s2
                })
            })
            .collect();
    }
    let mut vary = |vals: &[f64], tag: &str, set: fn(&mut Scenario, f64)| {
        if vals.is_empty() {
            return;
        }
        out = std::mem::take(&mut out)
            .into_iter()
            .flat_map(|s| {
                vals.iter().map(move |&x| {
                    let mut s2 = s.clone();
                    s2.id = format!("{}-{tag}{}", s.id, fmt_num(x));
                    set(&mut s2, x);
                    s2
                })
            })
            .collect();
    };
    vary(&a.mass_delta, "mass", |s, x| s.perturbations.pelvis_mass_delta += x);
    vary(&a.com_offset_x, "com", |s, x| s.perturbations.pelvis_com_offset_x += x);
    vary(&a.v_des, "vdes", |s, x| s.v_des = x);
    for extra in &grid.scenarios {
        out.push(extra.load(base)?);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in out.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(FormatError::invalid(&base.join("<grid>"), format!("duplicate scenario id {}", pair[0].id)));
        }
    }
    Ok(out)
}

fn run_one(sc: &Scenario, base: &Path, out: Option<&Path>) -> ReportRow {
    let result = match out {
        Some(dir) => run_scenario(sc, base, &dir.join("runs").join(&sc.id)),
        None => simulate(sc, base),
    };
    match result {
        Ok(s) => ReportRow::from_summary(&s),
        Err(e) => ReportRow {
            id: sc.id.clone(),
            mode: sc.mode,
            fell: false,
            steps: 0,
            final_mean_speed: None,
            final_rms: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every scenario. Failures are recorded per row and do not stop the
/// sweep. With `out`, each run writes into `out/runs/<id>/` and the table
/// goes to `out/report.json`.
pub fn sweep(scenarios: &[Scenario], base: &Path, out: Option<&Path>, parallel: bool) -> Result<Report, FormatError> {
    let mut runs: Vec<ReportRow> = if parallel {
        scenarios.par_iter().map(|s| run_one(s, base, out)).collect()
    } else {
        scenarios.iter().map(|s| run_one(s, base, out)).collect()
    };
    runs.sort_by(|a, b| a.id.cmp(&b.id));
    let report = Report { runs };
    if let Some(dir) = out {
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_by_mass_grid_has_six_sorted_runs() {
        let grid = Grid {
            template: Source::Inline(Scenario {
                id: "g".into(),
                ..Scenario::default()
            }),
            axes: Axes {
                mode: vec![RegulatorMode::Heuristic, RegulatorMode::Adaptive],
                mass_delta_pct: vec![-15.0, 0.0, 22.0],
                ..Axes::default()
            },
            ..Grid::default()
        };
        let s = expand(&grid, Path::new(".")).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.windows(2).all(|w| w[0].id < w[1].id));
        let total = RobotModel::planar_biped().total_mass();
        let plus = s.iter().find(|x| x.id == "g-adaptive-mass+22pct").unwrap();
        assert!((plus.perturbations.pelvis_mass_delta - 0.22 * total).abs() < 1e-12);
        assert_eq!(plus.mode, RegulatorMode::Adaptive);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let grid = Grid {
            scenarios: vec![Source::Inline(Scenario::default())],
            ..Grid::default()
        };
        assert!(expand(&grid, Path::new(".")).is_err());
    }
}
