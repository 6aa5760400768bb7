//! Steady states, time evolution and cutoff checks.

use faer::{Mat, Side};
use num_complex::Complex64;
use ode_solvers::dop_shared::OutputType;
use ode_solvers::{DVector, Dopri5, System};
use serde::Serialize;

use super::eigen::{eigenpairs, EigenOptions};
use super::fock::FockConfig;
use super::superop::{build_sector_liouvillian, Liouvillian};
use crate::error::{Error, Result};
use crate::model::{CouplingSpec, OscillatorParams};

/// Eigenvalues closer to zero than this count as part of the null space.
pub const ZERO_TOL: f64 = 1e-9;

/// Largest admissible negative eigenvalue of a steady state.
pub const PSD_TOL: f64 = 1e-10;

/// Normalized stationary density matrix.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: Mat<Complex64>,
    /// Eigenvalue of the null vector before normalization.
    pub eigenvalue: Complex64,
    /// `||L vec(rho)|| / ||L||_F`.
    pub kernel_residual: f64,
    pub min_eigenvalue: f64,
}

/// Unique steady state of a generator on the full space or sector 0.
///
/// Fails with [`Error::DegenerateSteadyState`] when more than one eigenvalue
/// lies within [`ZERO_TOL`] of zero.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    steady_state_with(l, &EigenOptions::default())
}

pub fn steady_state_with(l: &Liouvillian, opts: &EigenOptions) -> Result<SteadyState> {
    if matches!(l.sector(), Some(k) if k != 0) {
        return Err(Error::Config(format!(
            "sector {} holds no density matrix with unit trace",
            l.sector().unwrap()
        )));
    }
    let pairs = eigenpairs(l, 3.min(l.dim()), opts)?;
    let multiplicity = pairs
        .iter()
        .filter(|(e, _)| e.value.norm() < ZERO_TOL)
        .count();
    if multiplicity != 1 {
        if multiplicity == 0 {
            return Err(Error::EigenNonConvergence {
                iterations: 0,
                worst_residual: pairs.first().map_or(f64::NAN, |(e, _)| e.value.norm()),
            });
        }
        return Err(Error::DegenerateSteadyState { multiplicity });
    }
    let (est, v) = &pairs[0];
    let mut rho = l.unvectorize(v);
    let d = rho.nrows();
    let herm = Mat::<Complex64>::from_fn(d, d, |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
    rho = herm;
    let tr: Complex64 = (0..d).map(|i| rho[(i, i)]).sum();
    for j in 0..d {
        for i in 0..d {
            rho[(i, j)] /= tr;
        }
    }
    let vec = l.vectorize(&rho);
    let lv = l.matrix().mul_vec(&vec);
    let kernel = lv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = l.matrix().frobenius_norm().max(f64::MIN_POSITIVE);
    let min_eigenvalue = min_hermitian_eigenvalue(&rho)?;
    if min_eigenvalue < -PSD_TOL {
        return Err(Error::DenseEigen(format!(
            "steady state has negative eigenvalue {min_eigenvalue:e}"
        )));
    }
    Ok(SteadyState {
        rho,
        eigenvalue: est.value,
        kernel_residual: kernel / scale,
        min_eigenvalue,
    })
}

fn min_hermitian_eigenvalue(rho: &Mat<Complex64>) -> Result<f64> {
    let ev = rho
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

/// Trace distance `||a - b||_1 / 2` of two Hermitian matrices.
pub fn trace_distance(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Result<f64> {
    let diff = a - b;
    let ev = diff
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

/// `Tr(a^dag a rho)` for mode `mode` (0-based).
pub fn occupation(rho: &Mat<Complex64>, fock: &FockConfig, mode: usize) -> f64 {
    let d = fock.cutoff;
    let stride = d.pow((fock.n_modes - mode - 1) as u32);
    (0..rho.nrows())
        .map(|i| ((i / stride) % d) as f64 * rho[(i, i)].re)
        .sum()
}

struct Generator<'a> {
    l: &'a Liouvillian,
    x: std::cell::RefCell<(Vec<Complex64>, Vec<Complex64>)>,
}

impl System<f64, DVector<f64>> for Generator<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = self.l.dim();
        let mut bufs = self.x.borrow_mut();
        let (x, out) = &mut *bufs;
        for i in 0..n {
            x[i] = Complex64::new(y[i], y[n + i]);
        }
        self.l.matrix().mul_vec_into(x, out);
        for i in 0..n {
            dy[i] = out[i].re;
            dy[n + i] = out[i].im;
        }
    }
}

/// Tolerances of [`evolve_rho_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

/// Integrates `d vec(rho)/dt = L vec(rho)` from `t_grid[0]` and returns
/// `rho` at every grid time (the first entry is `rho0` restricted to the block).
pub fn evolve_rho(rho0: &Mat<Complex64>, l: &Liouvillian, t_grid: &[f64]) -> Result<Vec<Mat<Complex64>>> {
    evolve_rho_with(rho0, l, t_grid, &EvolveOptions::default())
}

pub fn evolve_rho_with(
    rho0: &Mat<Complex64>,
    l: &Liouvillian,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<Mat<Complex64>>> {
    let d = l.fock().hilbert_dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::Config(format!("rho0 must be {d}x{d}")));
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Config("time grid must be nondecreasing".into()));
    }
    let n = l.dim();
    let mut v = l.vectorize(rho0);
    let mut out = Vec::with_capacity(t_grid.len());
    if t_grid.is_empty() {
        return Ok(out);
    }
    out.push(l.unvectorize(&v));
    for w in t_grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 > t0 {
            let y0 = DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im });
            let sys = Generator {
                l,
                x: std::cell::RefCell::new((vec![Complex64::ZERO; n], vec![Complex64::ZERO; n])),
            };
            let mut solver = Dopri5::from_param(
                sys,
                t0,
                t1,
                t1 - t0,
                y0,
                opts.rtol,
                opts.atol,
                0.9,
                0.04,
                0.2,
                10.0,
                t1 - t0,
                0.0,
                opts.max_steps,
                u32::MAX,
                // the interpolated output path drifts; keep accepted steps only
                OutputType::Sparse,
            );
            solver.integrate().map_err(|e| Error::Integration {
                time: match e {
                    ode_solvers::dop_shared::IntegrationError::MaxNumStepReached { x, .. }
                    | ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { x }
                    | ode_solvers::dop_shared::IntegrationError::StiffnessDetected { x } => x,
                },
                reason: e.to_string(),
            })?;
            let (ts, ys) = (solver.x_out(), solver.y_out());
            let last = ys.last().ok_or_else(|| Error::Integration {
                time: t0,
                reason: "solver produced no output".into(),
            })?;
            let reached = *ts.last().unwrap();
            if (reached - t1).abs() > 1e-9 * t1.abs().max(1.0) {
                return Err(Error::Integration {
                    time: reached,
                    reason: format!("stopped before reaching t = {t1}"),
                });
            }
            for i in 0..n {
                v[i] = Complex64::new(last[i], last[n + i]);
            }
        }
        out.push(l.unvectorize(&v));
    }
    Ok(out)
}

/// Outcome of [`validate_cutoff`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffReport {
    pub cutoff: usize,
    /// Steady-state population of the highest Fock level at `cutoff`.
    pub terminal_population: f64,
    /// Trace distance between the steady states at `cutoff` and `cutoff + 4`.
    pub drift: f64,
    pub adequate: bool,
}

/// Population bound of [`validate_cutoff`].
pub const MAX_TERMINAL_POPULATION: f64 = 1e-6;
/// Drift bound of [`validate_cutoff`].
pub const MAX_DRIFT: f64 = 1e-8;

/// Single-mode steady state at cutoff `d`.
///
/// Without linear gain the two-quantum loss conserves parity and the null
/// space is degenerate; the state reached from the vacuum, the vacuum
/// itself, is returned in that case.
pub fn single_mode_steady_state(params: &OscillatorParams, d: usize) -> Result<Mat<Complex64>> {
    let fock = FockConfig::new(d, 1)?;
    if params.kappa1 == 0.0 {
        let mut rho = Mat::<Complex64>::zeros(d, d);
        rho[(0, 0)] = Complex64::ONE;
        return Ok(rho);
    }
    let undriven = OscillatorParams {
        drive: Complex64::ZERO,
        ..*params
    };
    let l = if params.has_drive() {
        super::superop::build_liouvillian(params, &CouplingSpec::uncoupled(), &fock)?
    } else {
        build_sector_liouvillian(&undriven, &CouplingSpec::uncoupled(), &fock, 0)?
    };
    Ok(steady_state(&l)?.rho)
}

/// Compares single-mode steady states at `d` and `d + 4`.
pub fn validate_cutoff(params: &OscillatorParams, d: usize) -> Result<CutoffReport> {
    let small = single_mode_steady_state(params, d)?;
    let large = single_mode_steady_state(params, d + 4)?;
    let mut padded = Mat::<Complex64>::zeros(d + 4, d + 4);
    for j in 0..d {
        for i in 0..d {
            padded[(i, j)] = small[(i, j)];
        }
    }
    let terminal_population = small[(d - 1, d - 1)].re;
    let drift = trace_distance(&padded, &large)?;
    Ok(CutoffReport {
        cutoff: d,
        terminal_population,
        drift,
        adequate: terminal_population < MAX_TERMINAL_POPULATION && drift < MAX_DRIFT,
    })
}

/// Smallest adequate cutoff in `2..=max_cutoff`.
pub fn minimal_cutoff(params: &OscillatorParams, max_cutoff: usize) -> Result<CutoffReport> {
    let mut last = None;
    for d in 2..=max_cutoff {
        let r = validate_cutoff(params, d)?;
        if r.adequate {
            return Ok(r);
        }
        last = Some(r);
    }
    Err(Error::Config(format!(
        "no adequate cutoff up to {max_cutoff} (last report: {last:?})"
    )))
}
