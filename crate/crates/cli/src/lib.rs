//! Library half of the `tcvdp` command-line tool.

use std::path::Path;

use tcvdp::config::SimConfig;
use tcvdp::{Error, Result};

pub mod manifest;
pub mod output;
pub mod run;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const PARTIAL: i32 = 4;
}

/// Exit code for an error that aborted a run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Sizing { .. } | Error::Io { .. } => exit::CONFIG,
        _ => exit::NUMERICAL,
    }
}

/// Reads a TOML configuration, or the configuration stored in a previous
/// run's `manifest.json`, and applies `key=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<SimConfig> {
    let Some(path) = path else {
        return SimConfig::from_toml_with_overrides(&SimConfig::default().to_toml(), overrides);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let cfg = manifest::config_from_manifest(&text)?;
        SimConfig::from_toml_with_overrides(&cfg.to_toml(), overrides)
    } else {
        SimConfig::from_toml_with_overrides(&text, overrides)
    }
}
