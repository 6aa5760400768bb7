//! Experiment runners: one per subcommand.
//!
//! Each runner writes its files into a directory it is handed and returns a
//! JSON summary for stdout. Per-size work is split out into `*_cell`
//! functions so tests can reuse it without touching the filesystem.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use tcvdp::config::SimConfig;
use tcvdp::io::{
    write_eigenvalues, write_gamma_fits, write_histogram, write_json, write_order_parameter,
    write_phase_fluctuation, write_snapshots, write_spectrum, write_steady_state, write_sync,
    histogram_file_name, GammaRow, SyncRow,
};
use tcvdp::lindblad::{
    build_liouvillian, build_sector_liouvillian, minimal_cutoff, spectrum, steady_state,
    EigenEstimate, FockConfig, SizingReport, SteadyState, ZERO_TOL,
};
use tcvdp::model::OscillatorParams;
use tcvdp::observables::{
    default_window, fit_gamma, linear_fit, noise_floor, order_parameter_modulus,
    phase_fluctuation, phase_space_histogram, power_spectrum, sync_measure, DecayFit, FitWindow,
    Histogram2D, HistogramSource, LinearFit, PhaseEstimator, PhaseFluctuation, PowerSpectrum,
    SpectrumOptions, SyncMeasure,
};
use tcvdp::oracle::{oracle_suite, CrossEngineOptions, OracleReport};
use tcvdp::sde::{simulate_ensemble_with, EnsembleOptions, EnsembleRecord};
use tcvdp::{Error, Result};

use crate::manifest::RunStatus;
use crate::output::cell_dir;

/// Fewest trajectories accepted for a decay fit.
pub const MIN_FIT_TRAJ: usize = 100;

/// Largest cutoff tried when `fock.cutoff = 0`.
pub const MAX_AUTO_CUTOFF: usize = 60;

/// The subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LangevinDecay,
    Spectrum,
    SyncSweep,
    Histograms,
    LiouvilleSpectrum,
    OracleSuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::LangevinDecay => "langevin-decay",
            Kind::Spectrum => "spectrum",
            Kind::SyncSweep => "sync-sweep",
            Kind::Histograms => "histograms",
            Kind::LiouvilleSpectrum => "liouville-spectrum",
            Kind::OracleSuite => "oracle-suite",
        }
    }
}

/// Settings that are not part of the physics configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Times at which every trajectory is dumped to `snapshots.csv`.
    pub snapshot_times: Vec<f64>,
}

/// What a runner hands back to the driver.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Value,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    fn new(summary: Value, failed: usize, total: usize, warnings: Vec<String>) -> Self {
        let status = if failed == 0 {
            RunStatus::Complete
        } else if 2 * failed > total {
            RunStatus::Failed
        } else {
            RunStatus::Partial
        };
        Self {
            summary,
            status,
            warnings,
        }
    }
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("[tcvdp] {}", msg.as_ref());
}

pub fn run(kind: Kind, cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    match kind {
        Kind::LangevinDecay => run_langevin_decay(cfg, dir, opts),
        Kind::Spectrum => run_spectrum(cfg, dir, opts),
        Kind::SyncSweep => run_sync_sweep(cfg, dir, opts),
        Kind::Histograms => run_histograms(cfg, dir, opts),
        Kind::LiouvilleSpectrum => run_liouville_spectrum(cfg, dir),
        Kind::OracleSuite => run_oracle_suite(cfg, dir),
    }
}

/// Work planned by a run, printed by `--dry-run`.
pub fn plan(kind: Kind, cfg: &SimConfig) -> Result<Value> {
    cfg.validate()?;
    match kind {
        Kind::LiouvilleSpectrum => {
            let params = cfg.oscillator_params()?;
            let mut cells = Vec::new();
            for &n in &cfg.fock.n_list {
                let fock = fock_for(cfg, &params, n)?;
                let sizing = fock.sizing();
                let fits = fock.check_budget(required_bytes(&fock, &params)).is_ok();
                cells.push(json!({ "N": n, "sizing": sizing, "fits_budget": fits }));
            }
            Ok(json!({ "kind": kind.name(), "cells": cells }))
        }
        Kind::OracleSuite => Ok(json!({ "kind": kind.name(), "checks": 4 })),
        _ => {
            let list = n_list_for(kind, cfg);
            let cells: Vec<Value> = list
                .iter()
                .map(|&n| {
                    let e = ensemble_cfg(kind, cfg, n);
                    json!({
                        "N": n,
                        "n_traj": e.n_traj,
                        "t_final": e.t_final,
                        "oscillator_steps": e.n_steps() as f64 * (n * e.n_traj) as f64,
                    })
                })
                .collect();
            Ok(json!({ "kind": kind.name(), "cells": cells }))
        }
    }
}

fn n_list_for(kind: Kind, cfg: &SimConfig) -> Vec<usize> {
    match kind {
        Kind::LiouvilleSpectrum => cfg.fock.n_list.clone(),
        _ => cfg.sweep.n_list.clone(),
    }
}

/// Stationary runners integrate to `sweep.t_eval` instead of `ensemble.t_final`.
fn ensemble_cfg(kind: Kind, cfg: &SimConfig, n: usize) -> tcvdp::model::EnsembleConfig {
    let mut e = cfg.ensemble_for(n);
    if matches!(kind, Kind::SyncSweep | Kind::Histograms) {
        e.t_final = cfg.sweep.t_eval;
    }
    e
}

// ---------------------------------------------------------------- decay

/// One size of the decay sweep.
pub struct DecayCell {
    pub record: EnsembleRecord,
    pub fit: Result<DecayFit>,
}

/// Runs the ensemble for `n` oscillators and fits the decay of `|r(t)|`.
pub fn decay_cell(cfg: &SimConfig, n: usize, opts: &EnsembleOptions) -> Result<DecayCell> {
    let params = cfg.oscillator_params()?;
    let coupling = cfg.coupling_spec()?;
    let ens = cfg.ensemble_for(n);
    if ens.n_traj < MIN_FIT_TRAJ {
        return Err(Error::Config(format!(
            "decay fits need at least {MIN_FIT_TRAJ} trajectories, got {}",
            ens.n_traj
        )));
    }
    let record = simulate_ensemble_with(&ens, &params, &coupling, opts)?;
    let fit = fit_record(cfg, &params, &record);
    Ok(DecayCell { record, fit })
}

fn fit_record(cfg: &SimConfig, params: &OscillatorParams, record: &EnsembleRecord) -> Result<DecayFit> {
    let amp = order_parameter_modulus(record);
    let floor = noise_floor(params.limit_cycle_radius(), record.n_traj);
    let window = default_window(
        &record.times,
        &amp,
        params.kappa1,
        floor,
        FitWindow {
            start: cfg.sweep.fit_t_start,
            end: cfg.sweep.fit_t_end,
        },
    )?;
    fit_gamma(&record.times, &amp, window, floor)
}

/// Unwrapped phase variance of oscillator 1 at every recorded time where it
/// is defined.
pub fn phase_series(record: &EnsembleRecord) -> Vec<PhaseFluctuation> {
    record
        .times
        .iter()
        .filter_map(|&t| phase_fluctuation(record, 1, t, PhaseEstimator::Unwrapped).ok())
        .collect()
}

/// `Gamma / kappa1` against `1 / N`.
pub fn gamma_scaling(rows: &[GammaRow]) -> Result<LinearFit> {
    let x: Vec<f64> = rows.iter().map(|r| 1.0 / r.n_osc as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.gamma_over_kappa1).collect();
    linear_fit(&x, &y)
}

fn ensemble_options(opts: &RunOptions) -> EnsembleOptions {
    EnsembleOptions {
        snapshot_times: opts.snapshot_times.clone(),
        ..Default::default()
    }
}

fn dump_snapshots(dir: &Path, record: &EnsembleRecord, opts: &RunOptions) -> Result<()> {
    if !opts.snapshot_times.is_empty() {
        write_snapshots(&dir.join("snapshots.csv"), &record.snapshots)?;
    }
    Ok(())
}

fn subdir(dir: &Path, n: usize) -> Result<std::path::PathBuf> {
    let p = dir.join(cell_dir(n));
    std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

pub fn run_langevin_decay(cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let params = cfg.oscillator_params()?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let total = cfg.sweep.n_list.len();
    for &n in &cfg.sweep.n_list {
        progress(format!("langevin-decay: N = {n}"));
        let cell = decay_cell(cfg, n, &ensemble_options(opts))?;
        let sub = subdir(dir, n)?;
        write_order_parameter(&sub.join("order_parameter.csv"), &cell.record)?;
        write_phase_fluctuation(&sub.join("phase_fluctuation.csv"), &phase_series(&cell.record))?;
        dump_snapshots(&sub, &cell.record, opts)?;
        match cell.fit {
            Ok(fit) => {
                let row = GammaRow {
                    n_osc: n,
                    gamma: fit.gamma_eff,
                    gamma_over_kappa1: fit.gamma_eff / params.kappa1,
                    r_squared: fit.r_squared,
                };
                rows.push(row);
                cells.push(json!({ "N": n, "fit": fit, "diverged": cell.record.diverged }));
            }
            Err(e) => {
                let msg = format!("N = {n}: {e}");
                progress(format!("warning: {msg}"));
                warnings.push(msg);
            }
        }
    }
    write_gamma_fits(&dir.join("gamma_fits.csv"), &rows)?;
    let scaling = if rows.len() >= 2 { gamma_scaling(&rows).ok() } else { None };
    if let Some(s) = &scaling {
        progress(format!(
            "Gamma/kappa1 vs 1/N: slope {:.4} +- {:.4}, intercept {:.2e}",
            s.slope, s.slope_stderr, s.intercept
        ));
    }
    let summary = json!({ "cells": cells, "gamma_over_kappa1_vs_inverse_n": scaling });
    Ok(RunOutcome::new(summary, total - rows.len(), total, warnings))
}

// ------------------------------------------------------------- spectrum

/// Power spectrum of the order parameter of one ensemble.
pub fn order_parameter_spectrum(cfg: &SimConfig, record: &EnsembleRecord) -> Result<PowerSpectrum> {
    power_spectrum(
        &record.times,
        &record.mean_field,
        &SpectrumOptions {
            window: cfg.sweep.spectrum_window,
            ..Default::default()
        },
    )
}

pub fn run_spectrum(cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let params = cfg.oscillator_params()?;
    let coupling = cfg.coupling_spec()?;
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let total = cfg.sweep.n_list.len();
    for &n in &cfg.sweep.n_list {
        progress(format!("spectrum: N = {n}"));
        let record = simulate_ensemble_with(&cfg.ensemble_for(n), &params, &coupling, &ensemble_options(opts))?;
        let sub = subdir(dir, n)?;
        write_order_parameter(&sub.join("order_parameter.csv"), &record)?;
        dump_snapshots(&sub, &record, opts)?;
        match order_parameter_spectrum(cfg, &record) {
            Ok(s) => {
                write_spectrum(&sub.join("spectrum.csv"), &s)?;
                cells.push(json!({
                    "N": n,
                    "peak_freq": s.peak_freq,
                    "fwhm": s.fwhm,
                    "parseval_error": s.parseval_error(),
                }));
            }
            Err(e) => warnings.push(format!("N = {n}: {e}")),
        }
    }
    let failed = total - cells.len();
    Ok(RunOutcome::new(json!({ "cells": cells }), failed, total, warnings))
}

// ---------------------------------------------------- stationary sweeps

/// Ensemble run to `sweep.t_eval` with a snapshot there.
pub fn stationary_cell(cfg: &SimConfig, n: usize, opts: &RunOptions) -> Result<EnsembleRecord> {
    let params = cfg.oscillator_params()?;
    let coupling = cfg.coupling_spec()?;
    let ens = ensemble_cfg(Kind::SyncSweep, cfg, n);
    let t = cfg.sweep.t_eval;
    let mut snapshot_times = opts.snapshot_times.clone();
    if !snapshot_times.contains(&t) {
        snapshot_times.push(t);
    }
    let options = EnsembleOptions {
        snapshot_times,
        track_phase: false,
        ..Default::default()
    };
    simulate_ensemble_with(&ens, &params, &coupling, &options)
}

/// `S_c` against `1 / N` over the finite values.
pub fn sync_scaling(values: &[SyncMeasure]) -> Result<LinearFit> {
    let finite: Vec<&SyncMeasure> = values.iter().filter(|s| !s.saturated).collect();
    let x: Vec<f64> = finite.iter().map(|s| 1.0 / s.n_osc as f64).collect();
    let y: Vec<f64> = finite.iter().map(|s| s.value).collect();
    linear_fit(&x, &y)
}

pub fn run_sync_sweep(cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let t = cfg.sweep.t_eval;
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    let list: Vec<usize> = cfg.sweep.n_list.iter().copied().filter(|&n| n >= 2).collect();
    if list.len() < cfg.sweep.n_list.len() {
        warnings.push("N = 1 skipped: the synchronization measure needs N >= 2".into());
    }
    if list.is_empty() {
        return Err(Error::Config("sync-sweep needs some N >= 2 in sweep.n_list".into()));
    }
    for &n in &list {
        progress(format!("sync-sweep: N = {n}"));
        let record = stationary_cell(cfg, n, opts)?;
        if !opts.snapshot_times.is_empty() {
            write_snapshots(&subdir(dir, n)?.join("snapshots.csv"), &record.snapshots)?;
        }
        let s = sync_measure(&record, t)?;
        if s.saturated {
            warnings.push(format!("N = {n}: S_c is infinite (error mode vanished); excluded from the fit"));
        }
        values.push(s);
    }
    let rows: Vec<SyncRow> = values
        .iter()
        .map(|s| SyncRow {
            n_osc: s.n_osc,
            t: s.t,
            s_c: s.value,
        })
        .collect();
    write_sync(&dir.join("sync.csv"), &rows)?;
    let fit = if values.iter().filter(|s| !s.saturated).count() >= 2 {
        sync_scaling(&values).ok()
    } else {
        None
    };
    if let Some(f) = &fit {
        progress(format!(
            "S_c vs 1/N: slope {:.4}, intercept {:.4}, R^2 {:.4}",
            f.slope, f.intercept, f.r_squared
        ));
    }
    let summary = json!({ "values": values, "s_c_vs_inverse_n": fit });
    Ok(RunOutcome::new(summary, 0, list.len(), warnings))
}

/// Shape statistics of one histogram.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HistogramStats {
    pub excess_kurtosis_q: f64,
    pub excess_kurtosis_p: f64,
    pub spread: f64,
    pub angular_anisotropy: f64,
    pub outside: usize,
}

impl HistogramStats {
    pub fn of(h: &Histogram2D) -> Self {
        let (kq, kp) = h.excess_kurtosis();
        Self {
            excess_kurtosis_q: kq,
            excess_kurtosis_p: kp,
            spread: h.spread(),
            angular_anisotropy: h.angular_anisotropy(),
            outside: h.outside,
        }
    }
}

/// Histograms of oscillator 1 and, for `N >= 2`, of the error mode at `sweep.t_eval`.
pub fn histograms_of(cfg: &SimConfig, record: &EnsembleRecord) -> Result<Vec<Histogram2D>> {
    let snap = record
        .snapshot_at(cfg.sweep.t_eval)
        .ok_or(Error::OffGrid(cfg.sweep.t_eval))?;
    let mut out = vec![phase_space_histogram(
        snap,
        HistogramSource::Oscillator1,
        cfg.sweep.hist_bins,
        cfg.sweep.hist_half_width,
    )?];
    if record.n_osc >= 2 {
        out.push(phase_space_histogram(
            snap,
            HistogramSource::ErrorMode,
            cfg.sweep.hist_bins,
            cfg.sweep.hist_half_width,
        )?);
    }
    Ok(out)
}

pub fn run_histograms(cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cells = Vec::new();
    for &n in &cfg.sweep.n_list {
        progress(format!("histograms: N = {n}"));
        let record = stationary_cell(cfg, n, opts)?;
        let sub = subdir(dir, n)?;
        if !opts.snapshot_times.is_empty() {
            write_snapshots(&sub.join("snapshots.csv"), &record.snapshots)?;
        }
        let mut stats = serde_json::Map::new();
        for h in histograms_of(cfg, &record)? {
            write_histogram(&sub.join(histogram_file_name(&h)), &h)?;
            stats.insert(h.source.tag().into(), serde_json::to_value(HistogramStats::of(&h)).expect("plain data"));
        }
        cells.push(json!({ "N": n, "t": cfg.sweep.t_eval, "histograms": stats }));
    }
    let total = cells.len();
    Ok(RunOutcome::new(json!({ "cells": cells }), 0, total, Vec::new()))
}

// ---------------------------------------------------- master equation

/// Spectrum and steady state of one system size.
pub struct LiouvilleCell {
    pub n_osc: usize,
    pub cutoff: usize,
    pub sizing: SizingReport,
    /// Sorted by descending real part, conjugate pairs completed.
    pub eigenvalues: Vec<EigenEstimate>,
    /// Slowest decay rate among the nonzero eigenvalues.
    pub gap: f64,
    /// Eigenvalues with `|lambda| < ZERO_TOL`.
    pub zero_count: usize,
    /// Slowest decay rate in each excitation-difference sector `0..=max_sector`.
    pub sector_gaps: Vec<f64>,
    pub steady: Option<SteadyState>,
}

fn fock_for(cfg: &SimConfig, params: &OscillatorParams, n: usize) -> Result<FockConfig> {
    let d = if cfg.fock.cutoff == 0 {
        minimal_cutoff(params, MAX_AUTO_CUTOFF)?.cutoff
    } else {
        cfg.fock.cutoff
    };
    Ok(FockConfig::new(d, n)?.with_budget(cfg.fock.memory_budget_mb * 1024 * 1024))
}

/// Bytes of the largest operator a cell will build.
fn required_bytes(fock: &FockConfig, params: &OscillatorParams) -> u64 {
    let s = fock.sizing();
    if params.has_drive() {
        s.sparse_bytes
    } else {
        // a sector holds about sector_dim / superop_dim of the nonzeros
        let frac = s.sector_dims[0] as f64 / s.superop_dim.max(1) as f64;
        (s.sparse_bytes as f64 * frac).ceil() as u64
    }
}

/// Liouvillian spectrum of `n` oscillators, block by block when the drive
/// vanishes.
pub fn liouville_cell(cfg: &SimConfig, n: usize) -> Result<LiouvilleCell> {
    let params = cfg.oscillator_params()?;
    let coupling = cfg.coupling_spec()?;
    let fock = fock_for(cfg, &params, n)?;
    let k = cfg.fock.n_eigs.max(2);
    let mut eigs = Vec::new();
    let mut sector_gaps = Vec::new();
    let steady;
    if params.has_drive() {
        let l = build_liouvillian(&params, &coupling, &fock)?;
        eigs = spectrum(&l, k)?;
        steady = steady_state(&l).ok();
    } else {
        let mut zero_block = None;
        for sector in 0..=cfg.fock.max_sector as i64 {
            if fock.sector_dim(sector) == 0 {
                break;
            }
            let l = build_sector_liouvillian(&params, &coupling, &fock, sector)?;
            let block = spectrum(&l, k.min(l.dim()))?;
            sector_gaps.push(slowest_rate(&block));
            for e in &block {
                eigs.push(*e);
                if sector > 0 {
                    eigs.push(EigenEstimate {
                        value: e.value.conj(),
                        residual: e.residual,
                    });
                }
            }
            if sector == 0 {
                zero_block = Some(l);
            }
        }
        steady = match zero_block {
            Some(l) => steady_state(&l).ok(),
            None => None,
        };
    }
    eigs.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    Ok(LiouvilleCell {
        n_osc: n,
        cutoff: fock.cutoff,
        sizing: fock.sizing(),
        gap: slowest_rate(&eigs),
        zero_count: eigs.iter().filter(|e| e.value.norm() < ZERO_TOL).count(),
        eigenvalues: eigs,
        sector_gaps,
        steady,
    })
}

fn slowest_rate(eigs: &[EigenEstimate]) -> f64 {
    eigs.iter()
        .filter(|e| e.value.norm() >= ZERO_TOL)
        .map(|e| -e.value.re)
        .fold(f64::INFINITY, f64::min)
}

pub fn run_liouville_spectrum(cfg: &SimConfig, dir: &Path) -> Result<RunOutcome> {
    let params = cfg.oscillator_params()?;
    // size everything before building anything
    let mut too_big = Vec::new();
    let mut largest = 0;
    for &n in &cfg.fock.n_list {
        let fock = fock_for(cfg, &params, n)?;
        let need = required_bytes(&fock, &params);
        if fock.check_budget(need).is_err() {
            too_big.push(format!("N = {n} (cutoff {}, {need} bytes)", fock.cutoff));
            largest = largest.max(need);
        }
    }
    if !too_big.is_empty() {
        return Err(Error::Sizing {
            what: too_big.join(", "),
            required_bytes: largest,
            budget_bytes: cfg.fock.memory_budget_mb * 1024 * 1024,
        });
    }
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for &n in &cfg.fock.n_list {
        progress(format!("liouville-spectrum: N = {n}"));
        let cell = liouville_cell(cfg, n)?;
        let sub = subdir(dir, n)?;
        write_eigenvalues(&sub.join("eigenvalues.csv"), &cell.eigenvalues)?;
        match &cell.steady {
            Some(ss) => write_steady_state(&sub.join("steady_state.csv"), &ss.rho)?,
            None => warnings.push(format!("N = {n}: steady state is not unique; steady_state.csv omitted")),
        }
        progress(format!("N = {n}: cutoff {}, gap {:.6}", cell.cutoff, cell.gap));
        cells.push(json!({
            "N": n,
            "cutoff": cell.cutoff,
            "gap": cell.gap,
            "zero_eigenvalues": cell.zero_count,
            "sector_gaps": cell.sector_gaps,
            "sizing": cell.sizing,
        }));
    }
    let total = cells.len();
    Ok(RunOutcome::new(json!({ "cells": cells }), 0, total, warnings))
}

// --------------------------------------------------------------- oracle

pub fn oracle_options(cfg: &SimConfig) -> CrossEngineOptions {
    CrossEngineOptions {
        n_traj: cfg.ensemble.n_traj,
        seed: cfg.ensemble.seed,
        dt: cfg.ensemble.dt,
        ..Default::default()
    }
}

pub fn run_oracle_suite(cfg: &SimConfig, dir: &Path) -> Result<RunOutcome> {
    progress("oracle-suite");
    let reports: Vec<OracleReport> = oracle_suite(&oracle_options(cfg))?;
    write_json(&dir.join("oracle_report.json"), &reports)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} failed: expected {}, observed {}", r.name, r.expected, r.observed))
        .collect();
    let status = if failed.is_empty() {
        RunStatus::Complete
    } else {
        RunStatus::Failed
    };
    Ok(RunOutcome {
        summary: json!({ "reports": reports }),
        status,
        warnings: failed,
    })
}
