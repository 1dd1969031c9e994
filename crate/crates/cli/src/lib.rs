//! Experiment front end: dataset preparation, training, evaluation,
//! ablations and the mask-ratio sweep, driven by flat-key config files.

pub mod output;
pub mod prepare;
pub mod run;

use std::path::{Path, PathBuf};

use amgae_core::config::{parse_override, RunConfig};
use amgae_core::{Error, Result};
use serde::Serialize;

/// Error body printed to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
    pub context: serde_json::Value,
}

impl ErrorReport {
    pub fn new(err: &Error, context: serde_json::Value) -> Self {
        Self {
            code: err.code().to_string(),
            message: err.to_string(),
            context,
        }
    }
}

/// Loads `path` with `key=value` overrides applied on top.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let parsed = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    RunConfig::load(path, &parsed)
}

/// `<output root>/<verb>/<config file stem>` unless `out` is given.
pub fn output_dir(out: Option<PathBuf>, verb: &str, config: &Path) -> PathBuf {
    out.unwrap_or_else(|| {
        let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        output::output_root().join(verb).join(stem)
    })
}
