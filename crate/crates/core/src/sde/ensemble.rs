//! Monte Carlo ensembles with a reduction order fixed by trajectory index.
//!
//! Trajectories are grouped into chunks of [`CHUNK`] consecutive indices.
//! Each chunk is summed sequentially, and chunk sums are merged in chunk
//! order, so the floating-point result does not depend on how many workers
//! ran the chunks.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{LangevinSystem, NoiseScheme, PhaseTracker, Scratch, TrajectoryState};
use crate::error::{Error, Result};
use crate::model::{CouplingSpec, EnsembleConfig, OscillatorParams};
use crate::rng::NoiseStream;

const CHUNK: usize = 16;

/// Fraction of trajectories allowed to diverge before the ensemble fails.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;

/// Amplitudes of oscillator 1 below this fraction of `max(R0, 1)` make its phase undefined.
const NEAR_ZERO_FRACTION: f64 = 1e-6;

/// Optional extras of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    /// Times (on the step grid) at which every trajectory's amplitudes are kept.
    pub snapshot_times: Vec<f64>,
    pub scheme: NoiseScheme,
    /// Follow the unwrapped phase of oscillator 1 at every step.
    pub track_phase: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            snapshot_times: Vec::new(),
            scheme: NoiseScheme::default(),
            track_phase: true,
        }
    }
}

/// Trajectory averages of a complex variable `z` per recorded time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteMoments {
    /// `<z>`
    pub mean: Vec<Complex64>,
    /// `<|z|^2>`
    pub abs2: Vec<f64>,
    /// `<z^2>`
    pub sq: Vec<Complex64>,
}

/// Moments of the error mode `a_1 - mean(a_2..a_N)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorModeMoments {
    pub mean: Vec<Complex64>,
    pub abs2: Vec<f64>,
    pub sq: Vec<Complex64>,
    /// `<|z|^4>`, for the standard error of `abs2`.
    pub abs4: Vec<f64>,
}

/// Phase statistics of oscillator 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseMoments {
    /// `<a_1 / |a_1|>` over trajectories with a defined phase.
    pub unit_mean: Vec<Complex64>,
    /// Trajectories whose `a_1` was too close to zero to define a phase.
    pub near_zero: Vec<usize>,
    /// Raw moments `<phi^k>`, `k = 1..=4`, of the unwrapped phase in the
    /// frame rotating at `omega`. Empty when phase tracking was off.
    pub unwrapped: [Vec<f64>; 4],
}

/// Occupations `|a_n|^2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupationMoments {
    /// `<(1/N) sum_n |a_n|^2>`
    pub mean: Vec<f64>,
    /// `<((1/N) sum_n |a_n|^2)^2>`
    pub mean_sq: Vec<f64>,
    /// `<|a_n|^2>` indexed `[time][site]`.
    pub per_site: Vec<Vec<f64>>,
}

/// Amplitudes of all surviving trajectories at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub traj: Vec<u64>,
    /// `amplitudes[k]` belongs to trajectory `traj[k]`.
    pub amplitudes: Vec<Vec<Complex64>>,
}

/// Trajectory-averaged statistics on the record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub times: Vec<f64>,
    pub n_osc: usize,
    /// Trajectories that entered the averages.
    pub n_traj: usize,
    /// Trajectories excluded because they diverged.
    pub diverged: usize,
    /// `<(1/N) sum_n a_n>`
    pub mean_field: Vec<Complex64>,
    pub osc1: SiteMoments,
    pub error_mode: ErrorModeMoments,
    pub phase: PhaseMoments,
    pub occupation: OccupationMoments,
    pub snapshots: Vec<Snapshot>,
}

impl EnsembleRecord {
    /// Index of `t` in [`times`](Self::times).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let step = match self.times.as_slice() {
            [] => return Err(Error::OffGrid(t)),
            [_] => 1.0,
            [a, b, ..] => b - a,
        };
        let k = (t - self.times[0]) / step;
        let i = k.round();
        if i >= 0.0 && (i as usize) < self.times.len() && (k - i).abs() < 1e-6 {
            Ok(i as usize)
        } else {
            Err(Error::OffGrid(t))
        }
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Running sums over a group of trajectories.
#[derive(Debug, Clone)]
struct Sums {
    count: usize,
    mean_field: Vec<Complex64>,
    a1: Vec<Complex64>,
    a1_abs2: Vec<f64>,
    a1_sq: Vec<Complex64>,
    err: Vec<Complex64>,
    err_abs2: Vec<f64>,
    err_sq: Vec<Complex64>,
    err_abs4: Vec<f64>,
    unit: Vec<Complex64>,
    near_zero: Vec<usize>,
    phi: [Vec<f64>; 4],
    occ: Vec<f64>,
    occ_sq: Vec<f64>,
    occ_site: Vec<f64>,
}

impl Sums {
    fn new(n_rec: usize, n_osc: usize, phase: bool) -> Self {
        let nph = if phase { n_rec } else { 0 };
        Self {
            count: 0,
            mean_field: vec![Complex64::ZERO; n_rec],
            a1: vec![Complex64::ZERO; n_rec],
            a1_abs2: vec![0.0; n_rec],
            a1_sq: vec![Complex64::ZERO; n_rec],
            err: vec![Complex64::ZERO; n_rec],
            err_abs2: vec![0.0; n_rec],
            err_sq: vec![Complex64::ZERO; n_rec],
            err_abs4: vec![0.0; n_rec],
            unit: vec![Complex64::ZERO; n_rec],
            near_zero: vec![0; n_rec],
            phi: std::array::from_fn(|_| vec![0.0; nph]),
            occ: vec![0.0; n_rec],
            occ_sq: vec![0.0; n_rec],
            occ_site: vec![0.0; n_rec * n_osc],
        }
    }

    fn clear(&mut self) {
        self.count = 0;
        self.mean_field.fill(Complex64::ZERO);
        self.a1.fill(Complex64::ZERO);
        self.a1_abs2.fill(0.0);
        self.a1_sq.fill(Complex64::ZERO);
        self.err.fill(Complex64::ZERO);
        self.err_abs2.fill(0.0);
        self.err_sq.fill(Complex64::ZERO);
        self.err_abs4.fill(0.0);
        self.unit.fill(Complex64::ZERO);
        self.near_zero.fill(0);
        for p in &mut self.phi {
            p.fill(0.0);
        }
        self.occ.fill(0.0);
        self.occ_sq.fill(0.0);
        self.occ_site.fill(0.0);
    }

    fn record(&mut self, k: usize, state: &TrajectoryState, phi: Option<f64>, zero_tol: f64) {
        let a = &state.amplitudes;
        let n = a.len();
        self.mean_field[k] = state.mean_field();
        let a1 = a[0];
        self.a1[k] = a1;
        self.a1_abs2[k] = a1.norm_sqr();
        self.a1_sq[k] = a1 * a1;
        let e = state.error_mode();
        let e2 = e.norm_sqr();
        self.err[k] = e;
        self.err_abs2[k] = e2;
        self.err_sq[k] = e * e;
        self.err_abs4[k] = e2 * e2;
        let r1 = a1.norm();
        if r1 < zero_tol {
            self.unit[k] = Complex64::ZERO;
            self.near_zero[k] = 1;
        } else {
            self.unit[k] = a1 / r1;
            self.near_zero[k] = 0;
        }
        if let Some(p) = phi {
            let mut pk = 1.0;
            for m in &mut self.phi {
                pk *= p;
                m[k] = pk;
            }
        }
        let site = &mut self.occ_site[k * n..(k + 1) * n];
        let mut tot = 0.0;
        for (s, x) in site.iter_mut().zip(a) {
            *s = x.norm_sqr();
            tot += *s;
        }
        let m = tot / n as f64;
        self.occ[k] = m;
        self.occ_sq[k] = m * m;
    }

    fn add(&mut self, o: &Sums) {
        fn acc<T: Copy + std::ops::AddAssign>(a: &mut [T], b: &[T]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        self.count += o.count;
        acc(&mut self.mean_field, &o.mean_field);
        acc(&mut self.a1, &o.a1);
        acc(&mut self.a1_abs2, &o.a1_abs2);
        acc(&mut self.a1_sq, &o.a1_sq);
        acc(&mut self.err, &o.err);
        acc(&mut self.err_abs2, &o.err_abs2);
        acc(&mut self.err_sq, &o.err_sq);
        acc(&mut self.err_abs4, &o.err_abs4);
        acc(&mut self.unit, &o.unit);
        acc(&mut self.near_zero, &o.near_zero);
        for (a, b) in self.phi.iter_mut().zip(&o.phi) {
            acc(a, b);
        }
        acc(&mut self.occ, &o.occ);
        acc(&mut self.occ_sq, &o.occ_sq);
        acc(&mut self.occ_site, &o.occ_site);
    }
}

struct ChunkResult {
    sums: Sums,
    diverged: Vec<(u64, f64)>,
    /// `[snapshot][traj in chunk]`
    snapshots: Vec<Vec<(u64, Vec<Complex64>)>>,
}

/// Runs `config.n_traj` trajectories with default options.
pub fn simulate_ensemble(
    config: &EnsembleConfig,
    params: &OscillatorParams,
    coupling: &CouplingSpec,
) -> Result<EnsembleRecord> {
    simulate_ensemble_with(config, params, coupling, &EnsembleOptions::default())
}

/// Runs the ensemble on the current rayon pool.
///
/// Diverged trajectories are left out of every average. The run fails with
/// [`Error::EnsembleDiverged`] if more than [`MAX_DIVERGED_FRACTION`] of them
/// diverge.
pub fn simulate_ensemble_with(
    config: &EnsembleConfig,
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    options: &EnsembleOptions,
) -> Result<EnsembleRecord> {
    config.validate(params, coupling)?;
    let sys = LangevinSystem::new(params, coupling, config.n_osc, config.dt, options.scheme)?;
    let mut snap_steps = Vec::with_capacity(options.snapshot_times.len());
    for &t in &options.snapshot_times {
        snap_steps.push(config.step_at(t).ok_or(Error::OffGrid(t))?);
    }
    let times = config.record_times();
    let n_rec = times.len();
    let n_osc = config.n_osc;
    let n_chunks = config.n_traj.div_ceil(CHUNK);
    // Chunks are reduced in waves to bound memory; wave boundaries do not
    // change the summation order.
    let wave = (rayon::current_num_threads() * 4).max(8);

    let mut total = Sums::new(n_rec, n_osc, options.track_phase);
    let mut diverged: Vec<(u64, f64)> = Vec::new();
    let mut snapshots: Vec<Snapshot> = options
        .snapshot_times
        .iter()
        .zip(&snap_steps)
        .map(|(_, &s)| Snapshot {
            time: s as f64 * config.dt,
            traj: Vec::new(),
            amplitudes: Vec::new(),
        })
        .collect();

    let mut start = 0;
    while start < n_chunks {
        let end = (start + wave).min(n_chunks);
        let results: Vec<Result<ChunkResult>> = (start..end)
            .into_par_iter()
            .map(|c| run_chunk(&sys, config, params, options, &snap_steps, c))
            .collect();
        for r in results {
            let r = r?;
            total.add(&r.sums);
            diverged.extend(r.diverged);
            for (snap, items) in snapshots.iter_mut().zip(r.snapshots) {
                for (traj, amps) in items {
                    snap.traj.push(traj);
                    snap.amplitudes.push(amps);
                }
            }
        }
        start = end;
    }

    if !diverged.is_empty()
        && diverged.len() as f64 > MAX_DIVERGED_FRACTION * config.n_traj as f64
    {
        let (first_traj, first_time) = diverged[0];
        return Err(Error::EnsembleDiverged {
            diverged: diverged.len(),
            total: config.n_traj,
            first_traj,
            first_time,
        });
    }
    Ok(finish(total, times, n_osc, diverged.len(), options.track_phase, snapshots))
}

fn run_chunk(
    sys: &LangevinSystem,
    config: &EnsembleConfig,
    params: &OscillatorParams,
    options: &EnsembleOptions,
    snap_steps: &[u64],
    chunk: usize,
) -> Result<ChunkResult> {
    let n_rec = config.record_times().len();
    let n_osc = config.n_osc;
    let first = chunk * CHUNK;
    let last = (first + CHUNK).min(config.n_traj);
    let mut sums = Sums::new(n_rec, n_osc, options.track_phase);
    let mut buf = Sums::new(n_rec, n_osc, options.track_phase);
    let mut scratch = Scratch::new(sys);
    let mut diverged = Vec::new();
    let mut snapshots = vec![Vec::new(); snap_steps.len()];
    let mut traj_snaps: Vec<Option<Vec<Complex64>>> = vec![None; snap_steps.len()];
    let zero_tol = NEAR_ZERO_FRACTION * params.limit_cycle_radius().max(1.0);
    let stride = config.record_stride as u64;
    let n_steps = config.n_steps();

    for traj in first as u64..last as u64 {
        buf.clear();
        traj_snaps.iter_mut().for_each(|s| *s = None);
        let mut noise = NoiseStream::new(config.seed, traj);
        let mut state = TrajectoryState::synchronized(params, n_osc);
        let mut tracker = options
            .track_phase
            .then(|| PhaseTracker::new(state.amplitudes[0], sys));
        let take_snaps = |state: &TrajectoryState, snaps: &mut [Option<Vec<Complex64>>]| {
            for (slot, &s) in snaps.iter_mut().zip(snap_steps) {
                if s == state.step {
                    *slot = Some(state.amplitudes.clone());
                }
            }
        };
        buf.record(0, &state, tracker.map(|t| t.value()), zero_tol);
        take_snaps(&state, &mut traj_snaps);
        let mut failed = None;
        while state.step < n_steps {
            if let Err(e) = sys.step_with(&mut state, &mut noise, &mut scratch) {
                failed = Some(e);
                break;
            }
            if let Some(t) = tracker.as_mut() {
                t.update(state.amplitudes[0]);
            }
            if state.step % stride == 0 {
                let k = (state.step / stride) as usize;
                buf.record(k, &state, tracker.map(|t| t.value()), zero_tol);
            }
            take_snaps(&state, &mut traj_snaps);
        }
        match failed {
            Some(Error::Divergence { traj, time }) => diverged.push((traj, time)),
            Some(e) => return Err(e),
            None => {
                buf.count = 1;
                sums.add(&buf);
                for (out, s) in snapshots.iter_mut().zip(traj_snaps.iter_mut()) {
                    if let Some(a) = s.take() {
                        out.push((traj, a));
                    }
                }
            }
        }
    }
    Ok(ChunkResult {
        sums,
        diverged,
        snapshots,
    })
}

fn finish(
    s: Sums,
    times: Vec<f64>,
    n_osc: usize,
    diverged: usize,
    phase: bool,
    snapshots: Vec<Snapshot>,
) -> EnsembleRecord {
    let inv = if s.count > 0 { 1.0 / s.count as f64 } else { f64::NAN };
    let c = |v: Vec<Complex64>| v.into_iter().map(|z| z * inv).collect::<Vec<_>>();
    let r = |v: Vec<f64>| v.into_iter().map(|x| x * inv).collect::<Vec<_>>();
    let unit_mean = s
        .unit
        .iter()
        .zip(&s.near_zero)
        .map(|(u, &z)| {
            let valid = s.count - z;
            if valid > 0 {
                u / valid as f64
            } else {
                Complex64::ZERO
            }
        })
        .collect();
    let per_site = s
        .occ_site
        .chunks(n_osc)
        .map(|row| row.iter().map(|x| x * inv).collect())
        .collect();
    let [p1, p2, p3, p4] = s.phi;
    let unwrapped = if phase {
        [r(p1), r(p2), r(p3), r(p4)]
    } else {
        Default::default()
    };
    EnsembleRecord {
        times,
        n_osc,
        n_traj: s.count,
        diverged,
        mean_field: c(s.mean_field),
        osc1: SiteMoments {
            mean: c(s.a1),
            abs2: r(s.a1_abs2),
            sq: c(s.a1_sq),
        },
        error_mode: ErrorModeMoments {
            mean: c(s.err),
            abs2: r(s.err_abs2),
            sq: c(s.err_sq),
            abs4: r(s.err_abs4),
        },
        phase: PhaseMoments {
            unit_mean,
            near_zero: s.near_zero,
            unwrapped,
        },
        occupation: OccupationMoments {
            mean: r(s.occ),
            mean_sq: r(s.occ_sq),
            per_site,
        },
        snapshots,
    }
}

#[cfg(test)]
mod tests {
    use super::super::simulate_trajectory;
    use super::*;

    fn small(n_osc: usize, n_traj: usize) -> EnsembleConfig {
        EnsembleConfig {
            n_osc,
            n_traj,
            dt: 0.05,
            t_final: 20.0,
            seed: 99,
            record_stride: 10,
        }
    }

    #[test]
    fn single_trajectory_record_matches_trajectory() {
        let p = OscillatorParams::semiclassical();
        let c = CouplingSpec::all_to_all(0.3);
        let cfg = small(3, 1);
        let rec = simulate_ensemble(&cfg, &p, &c).unwrap();
        let traj = simulate_trajectory(&cfg, &p, &c, 0).unwrap();
        assert_eq!(rec.times.len(), traj.len());
        for (k, s) in traj.iter().enumerate() {
            assert_eq!(rec.times[k], s.time);
            assert_eq!(rec.mean_field[k], s.mean_field());
            assert_eq!(rec.osc1.mean[k], s.amplitudes[0]);
            assert_eq!(rec.error_mode.mean[k], s.error_mode());
        }
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let p = OscillatorParams::semiclassical();
        let c = CouplingSpec::all_to_all(0.3);
        let cfg = small(4, 70);
        let opts = EnsembleOptions {
            snapshot_times: vec![10.0],
            ..Default::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble_with(&cfg, &p, &c, &opts).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn snapshots_off_grid_are_rejected() {
        let opts = EnsembleOptions {
            snapshot_times: vec![10.01],
            ..Default::default()
        };
        let err = simulate_ensemble_with(
            &small(2, 4),
            &OscillatorParams::semiclassical(),
            &CouplingSpec::all_to_all(0.3),
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OffGrid(_)));
    }

    #[test]
    fn record_lookup() {
        let rec = simulate_ensemble(
            &small(2, 2),
            &OscillatorParams::semiclassical(),
            &CouplingSpec::all_to_all(0.3),
        )
        .unwrap();
        assert_eq!(rec.index_of(0.0).unwrap(), 0);
        assert_eq!(rec.index_of(20.0).unwrap(), rec.times.len() - 1);
        assert!(rec.index_of(0.25).is_err());
        assert!(rec.index_of(20.5).is_err());
    }

    #[test]
    fn diverging_ensemble_fails() {
        // absurd extra noise drives every trajectory past the threshold
        let p = OscillatorParams::semiclassical();
        let cfg = small(1, 3);
        let sys = LangevinSystem::new(&p, &CouplingSpec::uncoupled(), 1, cfg.dt, NoiseScheme::Covariance)
            .unwrap()
            .with_extra_noise(1e6)
            .unwrap();
        let r = run_chunk(&sys, &cfg, &p, &EnsembleOptions::default(), &[], 0).unwrap();
        assert_eq!(r.diverged.len(), 3);
        assert_eq!(r.sums.count, 0);
    }
}
