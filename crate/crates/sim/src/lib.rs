//! File formats, scenario runner, sweeps and reports for the strider
//! walking simulator. The simulation itself lives in `strider-core`.

pub mod formats;
pub mod metrics;
pub mod report;
pub mod run;
pub mod scenario;
pub mod sweep;
