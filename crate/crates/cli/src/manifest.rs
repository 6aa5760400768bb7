//! `manifest.json`: everything needed to rerun an output directory.

use serde::{Deserialize, Serialize};
use tcvdp::config::SimConfig;
use tcvdp::{Error, Result};

/// `git describe` of the source tree the binary was built from.
pub const GIT_DESCRIBE: &str = env!("TCVDP_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub version: String,
    pub git_describe: String,
    /// Fully resolved configuration, overrides applied.
    pub config: SimConfig,
    pub overrides: Vec<String>,
    pub seed: u64,
    /// Worker threads, `None` for the default pool.
    pub workers: Option<usize>,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(kind: &str, config: &SimConfig, overrides: &[String], workers: Option<usize>) -> Self {
        Self {
            kind: kind.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            git_describe: GIT_DESCRIBE.to_owned(),
            config: config.clone(),
            overrides: overrides.to_vec(),
            seed: config.ensemble.seed,
            workers,
            wall_clock_seconds: 0.0,
            status: RunStatus::Complete,
            warnings: Vec::new(),
        }
    }
}

/// Reads the configuration back out of a manifest, for reruns.
pub fn config_from_manifest(text: &str) -> Result<SimConfig> {
    let m: Manifest = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("invalid manifest: {e}")))?;
    Ok(m.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_the_config() {
        let mut cfg = SimConfig::default();
        cfg.ensemble.n_traj = 123;
        cfg.oscillator.kappa2 = 0.2;
        let m = Manifest::new("spectrum", &cfg, &["ensemble.n_traj=123".into()], Some(2));
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(config_from_manifest(&text).unwrap(), cfg);
        assert!(!m.git_describe.is_empty());
    }
}
