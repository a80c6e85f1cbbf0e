//! Comparison table over finished runs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::formats::{read_json, FormatError};
use crate::run::RunSummary;
use crate::sweep::ReportRow;

fn collect(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "summary.json") {
            found.push(p);
        }
    }
    Ok(())
}

/// Loads every `summary.json` below `dir`, sorted by scenario id.
pub fn load_runs(dir: &Path) -> Result<Vec<RunSummary>, FormatError> {
    let mut paths = Vec::new();
    collect(dir, &mut paths)?;
    let mut runs = paths
        .iter()
        .map(|p| read_json::<RunSummary>(p))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(runs)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Plain-text table with one row per run.
pub fn table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let mut s = format!(
        "{:<width$}  {:<9}  {:<5}  {:>5}  {:>10}  {:>10}\n",
        "id", "mode", "fell", "steps", "mean_speed", "final_rms"
    );
    for r in rows {
        let mode = serde_json::to_value(r.mode)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        s.push_str(&format!(
            "{:<width$}  {:<9}  {:<5}  {:>5}  {:>10}  {:>10}",
            r.id,
            mode,
            r.fell,
            r.steps,
            opt(r.final_mean_speed),
            opt(r.final_rms)
        ));
        if let Some(e) = &r.error {
            s.push_str(&format!("  error: {e}"));
        }
        s.push('\n');
    }
    s
}
