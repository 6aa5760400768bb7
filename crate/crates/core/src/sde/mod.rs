//! Semiclassical Langevin dynamics of the coupled oscillator array.
//!
//! Each amplitude obeys
//!
//! ```text
//! da_n = [ -i omega a_n - i conj(Omega) + a_n (kappa1 - 2 kappa2 |a_n|^2)
//!          + sum_m (mu_mn / N) (a_m - a_n) ] dt
//!        + sqrt(3 kappa1 + 2 kappa2) dW_n
//!        + sum_m sqrt(mu_mn / N) dC_mn,        dC_mn = -dC_nm
//! ```
//!
//! with complex Wiener increments `<|dW|^2> = dt`. The pair noise is realized
//! with one increment `dZ` per unordered pair `{m < n}` and `<|dZ|^2> = dt`,
//! entering oscillator `n` as `+sqrt(mu_mn/N) dZ / 2` and oscillator `m` as
//! `-sqrt(mu_mn/N) dZ / 2`.
//!
//! The free rotation `exp(-i omega dt)` is applied exactly and everything
//! else with an Euler-Maruyama step. Because the noise is additive this
//! keeps strong order 1.

mod ensemble;

pub use ensemble::{
    simulate_ensemble, simulate_ensemble_with, EnsembleOptions, EnsembleRecord, ErrorModeMoments,
    OccupationMoments, PhaseMoments, SiteMoments, Snapshot, MAX_DIVERGED_FRACTION,
};

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coupling_matrix, CouplingMatrix, CouplingSpec, EnsembleConfig, OscillatorParams};
use crate::rng::NoiseStream;

/// Amplitudes beyond this multiple of the limit-cycle radius count as divergence.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

/// How the Gaussian increments of one step are drawn.
///
/// Both schemes produce the same joint distribution of increments: the
/// covariance per step is `dt * (D I + Lap / 4)` where `D = 3 kappa1 + 2 kappa2`
/// and `Lap` is the graph Laplacian of the normalized coupling rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScheme {
    /// One complex normal per oscillator, mixed by the square root of the
    /// joint covariance. `O(N)` per step for uniform coupling, `O(N^2)` otherwise.
    ///
    /// Channel `n` is the normal drawn for oscillator `n`.
    #[default]
    Covariance,
    /// Literal construction: one local increment per oscillator (channels
    /// `0..N`), then one increment per pair `(m, n)`, `m < n`, in lexicographic
    /// order. `O(N^2)` per step.
    PerPair,
}

/// Amplitudes of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    /// Integrator steps taken so far; selects the noise block of the next step.
    pub step: u64,
}

impl TrajectoryState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            time: 0.0,
            step: 0,
        }
    }

    /// All oscillators on the deterministic limit cycle with phase zero.
    pub fn synchronized(params: &OscillatorParams, n_osc: usize) -> Self {
        let r0 = params.limit_cycle_radius();
        Self::new(vec![Complex64::new(r0, 0.0); n_osc])
    }

    pub fn n_osc(&self) -> usize {
        self.amplitudes.len()
    }

    /// Site average `(1/N) sum_n a_n`.
    pub fn mean_field(&self) -> Complex64 {
        self.amplitudes.iter().sum::<Complex64>() / self.amplitudes.len() as f64
    }

    /// `a_1 - mean(a_2..a_N)`; zero for a single oscillator.
    pub fn error_mode(&self) -> Complex64 {
        let n = self.amplitudes.len();
        if n < 2 {
            return Complex64::ZERO;
        }
        let rest: Complex64 = self.amplitudes[1..].iter().sum();
        self.amplitudes[0] - rest / (n - 1) as f64
    }
}

#[derive(Debug, Clone)]
enum NoiseFactor {
    /// `eta = alpha xi - beta mean(xi)`
    RankOne { alpha: f64, beta: f64 },
    /// Row-major symmetric square root of the covariance.
    Dense(Vec<f64>),
    PerPair {
        local: f64,
        pairs: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone)]
enum CouplingForm {
    None,
    /// Every off-diagonal normalized rate equal to this value.
    Uniform(f64),
    /// Row-major normalized rates.
    Dense(Vec<f64>),
}

/// Precomputed right-hand side of the Langevin equation for a fixed step size.
#[derive(Debug, Clone)]
pub struct LangevinSystem {
    params: OscillatorParams,
    n_osc: usize,
    dt: f64,
    rotation: Complex64,
    coupling: CouplingForm,
    rates: CouplingMatrix,
    scheme: NoiseScheme,
    noise: NoiseFactor,
    /// Extra independent white noise per oscillator, used to calibrate the
    /// integrator against pure diffusion.
    extra_noise: f64,
    divergence_radius: f64,
}

impl LangevinSystem {
    pub fn new(
        params: &OscillatorParams,
        coupling: &CouplingSpec,
        n_osc: usize,
        dt: f64,
        scheme: NoiseScheme,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        let rates = coupling_matrix(coupling, n_osc)?;
        let form = if rates.is_zero() || n_osc == 1 {
            CouplingForm::None
        } else if rates.is_uniform() {
            CouplingForm::Uniform(rates.rate(0, 1))
        } else {
            CouplingForm::Dense(
                (0..n_osc * n_osc)
                    .map(|k| rates.rate(k / n_osc, k % n_osc))
                    .collect(),
            )
        };
        let mut sys = Self {
            params: *params,
            n_osc,
            dt,
            rotation: Complex64::from_polar(1.0, -params.omega * dt),
            coupling: form,
            rates,
            scheme,
            noise: NoiseFactor::RankOne {
                alpha: 0.0,
                beta: 0.0,
            },
            extra_noise: 0.0,
            divergence_radius: DIVERGENCE_FACTOR * params.limit_cycle_radius().max(1.0),
        };
        sys.noise = sys.noise_factor()?;
        Ok(sys)
    }

    /// Adds an independent complex white-noise channel of amplitude `amplitude`
    /// to every oscillator (`<|dW|^2> = dt`), on top of the physical noise.
    pub fn with_extra_noise(mut self, amplitude: f64) -> Result<Self> {
        self.extra_noise = amplitude;
        self.noise = self.noise_factor()?;
        Ok(self)
    }

    /// Switches every noise channel off, leaving the deterministic flow.
    pub fn noiseless(mut self) -> Self {
        self.scheme = NoiseScheme::Covariance;
        self.noise = NoiseFactor::RankOne {
            alpha: 0.0,
            beta: 0.0,
        };
        self
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> NoiseScheme {
        self.scheme
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn divergence_radius(&self) -> f64 {
        self.divergence_radius
    }

    fn local_variance(&self) -> f64 {
        let a = self.params.local_noise_amplitude();
        a * a + self.extra_noise * self.extra_noise
    }

    fn noise_factor(&self) -> Result<NoiseFactor> {
        let n = self.n_osc;
        let local = self.local_variance();
        match self.scheme {
            NoiseScheme::PerPair => {
                let mut pairs = Vec::new();
                for m in 0..n {
                    for k in (m + 1)..n {
                        let rate = self.rates.rate(m, k);
                        if rate > 0.0 {
                            pairs.push((m, k, 0.5 * rate.sqrt()));
                        }
                    }
                }
                Ok(NoiseFactor::PerPair {
                    local: local.sqrt(),
                    pairs,
                })
            }
            NoiseScheme::Covariance => match &self.coupling {
                CouplingForm::None => Ok(NoiseFactor::RankOne {
                    alpha: local.sqrt(),
                    beta: 0.0,
                }),
                CouplingForm::Uniform(c) => {
                    // D I + (c N / 4) P with P the projector orthogonal to (1,..,1):
                    // sqrt = sqrt(D + cN/4) P + sqrt(D) (I - P)
                    let alpha = (local + c * n as f64 / 4.0).sqrt();
                    Ok(NoiseFactor::RankOne {
                        alpha,
                        beta: alpha - local.sqrt(),
                    })
                }
                CouplingForm::Dense(r) => {
                    let cov = Mat::<f64>::from_fn(n, n, |i, j| {
                        if i == j {
                            let row: f64 = (0..n).map(|m| r[i * n + m]).sum();
                            local + row / 4.0
                        } else {
                            -r[i * n + j] / 4.0
                        }
                    });
                    let evd = cov
                        .self_adjoint_eigen(Side::Lower)
                        .map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
                    let u = evd.U();
                    let s = evd.S().column_vector();
                    let mut sqrt = vec![0.0; n * n];
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for k in 0..n {
                                acc += u[(i, k)] * s[k].max(0.0).sqrt() * u[(j, k)];
                            }
                            sqrt[i * n + j] = acc;
                        }
                    }
                    Ok(NoiseFactor::Dense(sqrt))
                }
            },
        }
    }

    /// Deterministic right-hand side, including the free rotation.
    pub fn drift(&self, state: &TrajectoryState) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.n_osc];
        self.slow_drift(&state.amplitudes, &mut out);
        for (f, a) in out.iter_mut().zip(&state.amplitudes) {
            *f += Complex64::new(0.0, -self.params.omega) * a;
        }
        out
    }

    /// Drift without the `-i omega a` term.
    fn slow_drift(&self, a: &[Complex64], out: &mut [Complex64]) {
        let p = &self.params;
        let drive = Complex64::new(0.0, -1.0) * p.drive.conj();
        for (f, &x) in out.iter_mut().zip(a) {
            *f = drive + x * (p.kappa1 - 2.0 * p.kappa2 * x.norm_sqr());
        }
        match &self.coupling {
            CouplingForm::None => {}
            CouplingForm::Uniform(c) => {
                let sum: Complex64 = a.iter().sum();
                let n = self.n_osc as f64;
                for (f, &x) in out.iter_mut().zip(a) {
                    *f += (sum - x * n) * c;
                }
            }
            CouplingForm::Dense(r) => {
                let n = self.n_osc;
                for (i, f) in out.iter_mut().enumerate() {
                    let row = &r[i * n..(i + 1) * n];
                    let mut acc = Complex64::ZERO;
                    for (&rate, &x) in row.iter().zip(a) {
                        acc += (x - a[i]) * rate;
                    }
                    *f += acc;
                }
            }
        }
    }

    /// Number of complex noise channels drawn per step.
    pub fn n_channels(&self) -> usize {
        match &self.noise {
            NoiseFactor::PerPair { pairs, .. } => self.n_osc + pairs.len(),
            _ => self.n_osc,
        }
    }

    /// Maps the raw channel increments `xi` (each with `<|xi|^2> = dt`) to the
    /// per-oscillator noise `eta`.
    fn mix_noise(&self, xi: &[Complex64], eta: &mut [Complex64]) {
        match &self.noise {
            NoiseFactor::RankOne { alpha, beta } => {
                let mean = xi.iter().sum::<Complex64>() / self.n_osc as f64;
                for (e, &x) in eta.iter_mut().zip(xi) {
                    *e = x * *alpha - mean * *beta;
                }
            }
            NoiseFactor::Dense(s) => {
                let n = self.n_osc;
                for (i, e) in eta.iter_mut().enumerate() {
                    let row = &s[i * n..(i + 1) * n];
                    *e = row.iter().zip(xi).map(|(&w, &x)| x * w).sum();
                }
            }
            NoiseFactor::PerPair { local, pairs } => {
                for (e, &x) in eta.iter_mut().zip(xi) {
                    *e = x * *local;
                }
                for (&(m, n, amp), &x) in pairs.iter().zip(&xi[self.n_osc..]) {
                    let dz = x * amp;
                    eta[n] += dz;
                    eta[m] -= dz;
                }
            }
        }
    }

    /// Advances `state` by one step, drawing the noise of block `state.step`.
    pub fn step(&self, state: &mut TrajectoryState, noise: &mut NoiseStream) -> Result<()> {
        let mut scratch = Scratch::new(self);
        self.step_with(state, noise, &mut scratch)
    }

    pub(crate) fn step_with(
        &self,
        state: &mut TrajectoryState,
        noise: &mut NoiseStream,
        scratch: &mut Scratch,
    ) -> Result<()> {
        noise.seek_step(state.step);
        for x in scratch.xi.iter_mut() {
            *x = noise.complex_increment(self.dt);
        }
        let traj = noise.trajectory();
        self.advance(state, scratch, traj)
    }

    /// One step with channel increments already in `scratch.xi`.
    pub(crate) fn advance(&self, state: &mut TrajectoryState, scratch: &mut Scratch, traj: u64) -> Result<()> {
        let Scratch { drift, xi, eta } = scratch;
        self.slow_drift(&state.amplitudes, drift);
        self.mix_noise(xi, eta);
        let dt = self.dt;
        let limit = self.divergence_radius * self.divergence_radius;
        let mut escaped = false;
        for ((a, &f), &e) in state.amplitudes.iter_mut().zip(drift.iter()).zip(eta.iter()) {
            *a = self.rotation * (*a + f * dt + e);
            // written so that NaN counts as escaped
            escaped |= !(a.norm_sqr() <= limit);
        }
        state.step += 1;
        state.time = state.step as f64 * dt;
        if escaped {
            return Err(Error::Divergence {
                traj,
                time: state.time,
            });
        }
        Ok(())
    }
}

/// Per-trajectory scratch buffers.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    drift: Vec<Complex64>,
    pub(crate) xi: Vec<Complex64>,
    eta: Vec<Complex64>,
}

impl Scratch {
    pub(crate) fn new(sys: &LangevinSystem) -> Self {
        let n = sys.n_osc;
        Self {
            drift: vec![Complex64::ZERO; n],
            xi: vec![Complex64::ZERO; sys.n_channels()],
            eta: vec![Complex64::ZERO; n],
        }
    }
}

/// Phase of oscillator 1 in the frame co-rotating at `omega`, unwrapped across steps.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PhaseTracker {
    unwrapped: f64,
    previous: Complex64,
    counter_rotation: Complex64,
}

impl PhaseTracker {
    pub(crate) fn new(a1: Complex64, sys: &LangevinSystem) -> Self {
        Self {
            unwrapped: if a1 == Complex64::ZERO { 0.0 } else { a1.arg() },
            previous: a1,
            counter_rotation: sys.rotation.conj(),
        }
    }

    #[inline]
    pub(crate) fn update(&mut self, a1: Complex64) {
        let z = a1 * self.previous.conj() * self.counter_rotation;
        if z != Complex64::ZERO {
            self.unwrapped += z.im.atan2(z.re);
        }
        self.previous = a1;
    }

    pub(crate) fn value(&self) -> f64 {
        self.unwrapped
    }
}

/// Integrates one trajectory, returning the states on the record grid.
pub fn simulate_trajectory(
    config: &EnsembleConfig,
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    traj_index: u64,
) -> Result<Vec<TrajectoryState>> {
    simulate_trajectory_with(config, params, coupling, traj_index, NoiseScheme::default())
}

pub fn simulate_trajectory_with(
    config: &EnsembleConfig,
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    traj_index: u64,
    scheme: NoiseScheme,
) -> Result<Vec<TrajectoryState>> {
    config.validate(params, coupling)?;
    let sys = LangevinSystem::new(params, coupling, config.n_osc, config.dt, scheme)?;
    let mut noise = NoiseStream::new(config.seed, traj_index);
    let mut state = TrajectoryState::synchronized(params, config.n_osc);
    let mut scratch = Scratch::new(&sys);
    let stride = config.record_stride as u64;
    let n_steps = config.n_steps();
    let mut out = Vec::with_capacity((n_steps / stride + 1) as usize);
    out.push(state.clone());
    while state.step < n_steps {
        sys.step_with(&mut state, &mut noise, &mut scratch)?;
        if state.step % stride == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}
