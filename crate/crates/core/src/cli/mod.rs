//! Experiment runner: configuration parsing, dispatch to the numerical
//! modules, and CSV/dump/summary output.

mod config;
mod run;

use std::path::Path;

pub use config::{default_resolution, parse_config, ExperimentConfig, ExperimentKind};
pub use run::{float, run, RunReport};

use crate::{Error, Result};

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
