//! Parameter files.
//!
//! A run is described by a TOML document with the sections below. Every key
//! has a default, so an empty file is a valid configuration.
//!
//! ```toml
//! [oscillator]
//! omega = 1.0
//! kappa1 = 0.1
//! kappa2 = 0.005
//! drive_re = 0.0
//! drive_im = 0.0
//!
//! [coupling]
//! mu = 0.3
//! gamma = 0.0
//! topology = "ring"
//!
//! [ensemble]
//! n_osc = 10
//! n_traj = 2000
//! dt = 0.05
//! t_final = 2000.0
//! seed = 1592639905
//! record_stride = 20
//!
//! [sweep]
//! n_list = [4, 8, 16, 32]
//! t_eval = 10000.0
//!
//! [fock]
//! cutoff = 0          # 0 selects the smallest adequate cutoff automatically
//! n_list = [1, 2, 3]
//! ```
//!
//! Dotted overrides such as `ensemble.n_traj=500` are applied to the parsed
//! tree before it is interpreted, last one wins. Floats are written with the
//! shortest representation that parses back to the same bits, so
//! [`SimConfig::to_toml`] followed by [`SimConfig::from_toml`] is lossless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingSpec, EnsembleConfig, OscillatorParams, Topology};
use crate::observables::SpectrumWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorSection {
    pub omega: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub drive_re: f64,
    pub drive_im: f64,
}

impl Default for OscillatorSection {
    fn default() -> Self {
        let p = OscillatorParams::semiclassical();
        Self {
            omega: p.omega,
            kappa1: p.kappa1,
            kappa2: p.kappa2,
            drive_re: 0.0,
            drive_im: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub mu: f64,
    pub gamma: f64,
    pub topology: String,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            mu: 0.3,
            gamma: 0.0,
            topology: "ring".into(),
        }
    }
}

/// Experiment-level settings shared by the Langevin runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_list: Vec<usize>,
    /// Evaluation time for synchronization measures and histograms.
    pub t_eval: f64,
    /// Start of the decay-fit window; defaults to `5 / kappa1`.
    pub fit_t_start: Option<f64>,
    /// End of the decay-fit window; defaults to the first drop below the noise floor.
    pub fit_t_end: Option<f64>,
    pub spectrum_window: SpectrumWindow,
    pub hist_bins: usize,
    /// Half-width of the square histogram range; automatic when absent.
    pub hist_half_width: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_list: vec![4, 8, 16, 32],
            t_eval: 10_000.0,
            fit_t_start: None,
            fit_t_end: None,
            spectrum_window: SpectrumWindow::Rectangular,
            hist_bins: 64,
            hist_half_width: None,
        }
    }
}

/// Truncated Fock space settings for the master-equation runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockSection {
    /// Per-mode cutoff; `0` means "smallest adequate cutoff".
    pub cutoff: usize,
    pub n_list: Vec<usize>,
    /// Eigenvalues requested per symmetry sector.
    pub n_eigs: usize,
    /// Largest excitation-difference sector computed.
    pub max_sector: usize,
    pub memory_budget_mb: u64,
}

impl Default for FockSection {
    fn default() -> Self {
        Self {
            cutoff: 0,
            n_list: vec![1, 2, 3],
            n_eigs: 8,
            max_sector: 2,
            memory_budget_mb: 3072,
        }
    }
}

/// Complete parameter tree of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub oscillator: OscillatorSection,
    pub coupling: CouplingSection,
    pub ensemble: EnsembleConfig,
    pub sweep: SweepSection,
    pub fock: FockSection,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides::<&str>(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides in order, then validates.
    pub fn from_toml_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut tree: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(format!("invalid TOML: {e}")))?;
        for item in overrides {
            apply_override(&mut tree, item.as_ref())?;
        }
        let cfg: SimConfig = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.oscillator_params()?;
        let coupling = self.coupling_spec()?;
        self.ensemble.validate(&params, &coupling)?;
        if self.sweep.n_list.iter().any(|&n| n == 0) {
            return Err(Error::config("sweep.n_list entries must be >= 1"));
        }
        if self.sweep.hist_bins == 0 {
            return Err(Error::config("sweep.hist_bins must be >= 1"));
        }
        if self.fock.n_list.iter().any(|&n| n == 0) {
            return Err(Error::config("fock.n_list entries must be >= 1"));
        }
        if self.fock.cutoff == 1 {
            return Err(Error::config("fock.cutoff must be 0 (auto) or >= 2"));
        }
        Ok(())
    }

    pub fn oscillator_params(&self) -> Result<OscillatorParams> {
        let o = &self.oscillator;
        OscillatorParams::new(
            o.omega,
            o.kappa1,
            o.kappa2,
            Complex64::new(o.drive_re, o.drive_im),
        )
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec> {
        let topology: Topology = self.coupling.topology.parse()?;
        let mut spec = CouplingSpec::new(self.coupling.mu, self.coupling.gamma)?;
        spec.topology = topology;
        Ok(spec)
    }

    /// Ensemble settings with `n_osc` replaced by `n`.
    pub fn ensemble_for(&self, n: usize) -> EnsembleConfig {
        EnsembleConfig {
            n_osc: n,
            ..self.ensemble.clone()
        }
    }
}

/// Applies one `section.key=value` override. The value is parsed as a TOML
/// value, falling back to a plain string.
pub fn apply_override(tree: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::config(format!("empty override key in {item:?}")))?;
    let mut table = tree;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override key {key:?} crosses a non-table")))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let cfg = SimConfig::from_toml("").unwrap();
        assert_eq!(cfg, SimConfig::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = SimConfig::default();
        cfg.oscillator.kappa1 = 0.1 + 1e-17 * 3.0;
        cfg.oscillator.drive_im = -1.0 / 3.0;
        cfg.coupling.gamma = std::f64::consts::LN_2;
        cfg.ensemble.seed = u64::MAX >> 1;
        cfg.sweep.fit_t_end = Some(1234.5);
        let text = cfg.to_toml();
        let back = SimConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.oscillator.drive_im.to_bits(), cfg.oscillator.drive_im.to_bits());
    }

    #[test]
    fn overrides_last_wins() {
        let cfg = SimConfig::from_toml_with_overrides(
            "[ensemble]\nn_traj = 10\n",
            &["ensemble.n_traj=500", "coupling.mu=0", "ensemble.n_traj=700", "sweep.n_list=[2,5]"],
        )
        .unwrap();
        assert_eq!(cfg.ensemble.n_traj, 700);
        assert_eq!(cfg.coupling.mu, 0.0);
        assert_eq!(cfg.sweep.n_list, vec![2, 5]);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        assert!(SimConfig::from_toml("[coupling]\ntopology = \"square\"\n")
            .unwrap_err()
            .is_config());
        assert!(SimConfig::from_toml("[oscillator]\nkappa2 = 0.0\n").unwrap_err().is_config());
        assert!(SimConfig::from_toml("[ensemble]\nbogus = 1\n").unwrap_err().is_config());
        assert!(SimConfig::from_toml_with_overrides("", &["ensemble.dt"]).is_err());
        assert!(SimConfig::from_toml("not toml [").is_err());
    }
}
