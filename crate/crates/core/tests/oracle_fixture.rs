//! The population table below is produced by the oracle, never edited by
//! hand. Regenerate with `TCVDP_REGENERATE_FIXTURES=1 cargo test --test oracle_fixture`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tcvdp::model::OscillatorParams;
use tcvdp::oracle::single_vdp_steady_distribution;

#[derive(Debug, Serialize, Deserialize)]
struct PopulationFixture {
    kappa1: f64,
    kappa2: f64,
    cutoff: usize,
    tolerance: f64,
    populations: Vec<f64>,
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/single_vdp_populations.json")
}

fn fresh() -> PopulationFixture {
    let params = OscillatorParams::few_quanta();
    let cutoff = 8;
    PopulationFixture {
        kappa1: params.kappa1,
        kappa2: params.kappa2,
        cutoff,
        tolerance: 1e-12,
        populations: single_vdp_steady_distribution(&params, cutoff).unwrap(),
    }
}

#[test]
fn frozen_populations_match_a_fresh_oracle_run() {
    let now = fresh();
    if std::env::var_os("TCVDP_REGENERATE_FIXTURES").is_some() {
        let text = serde_json::to_string_pretty(&now).unwrap();
        std::fs::write(fixture_path(), text + "\n").unwrap();
    }
    let text = std::fs::read_to_string(fixture_path()).expect("fixture present");
    let frozen: PopulationFixture = serde_json::from_str(&text).unwrap();
    assert_eq!((frozen.kappa1, frozen.kappa2, frozen.cutoff), (now.kappa1, now.kappa2, now.cutoff));
    assert_eq!(frozen.populations.len(), now.populations.len());
    for (n, (a, b)) in frozen.populations.iter().zip(&now.populations).enumerate() {
        assert!((a - b).abs() <= frozen.tolerance, "level {n}: frozen {a}, fresh {b}");
    }
}

#[test]
fn frozen_populations_are_few_quanta() {
    let text = std::fs::read_to_string(fixture_path()).expect("fixture present");
    let frozen: PopulationFixture = serde_json::from_str(&text).unwrap();
    let total: f64 = frozen.populations.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let low: f64 = frozen.populations[..3].iter().sum();
    assert!(low > 0.9, "{low}");
}
