//! Physical parameters, ring coupling topology and ensemble configuration.
//!
//! Site indices in the public API are 1-based. Coupling between sites `m` and
//! `n` on a ring of `N` sites follows
//!
//! ```text
//! mu_mn = mu * (1 - delta_mn) * exp(-gamma * (d_mn - 1))
//! ```
//!
//! where `d_mn` is the shorter way round the ring, and every rate is divided
//! by the normalization `sum_m lambda_1m + 1`, which equals `N` for `gamma = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `dt * rate` product accepted by [`EnsembleConfig::validate`].
pub const STABILITY_LIMIT: f64 = 0.05;

/// Rates of a single van der Pol oscillator, in units of the resonance frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    pub omega: f64,
    /// Linear gain rate.
    pub kappa1: f64,
    /// Two-quantum loss rate.
    pub kappa2: f64,
    /// Complex coherent drive amplitude.
    pub drive: Complex64,
}

impl OscillatorParams {
    pub fn new(omega: f64, kappa1: f64, kappa2: f64, drive: Complex64) -> Result<Self> {
        let p = Self {
            omega,
            kappa1,
            kappa2,
            drive,
        };
        p.validate()?;
        Ok(p)
    }

    /// Large-amplitude regime: `omega = 1`, `kappa1 = 0.1`, `kappa2 = 0.005`.
    pub fn semiclassical() -> Self {
        Self {
            omega: 1.0,
            kappa1: 0.1,
            kappa2: 0.005,
            drive: Complex64::ZERO,
        }
    }

    /// Few-quanta regime used for Liouvillian spectra: `kappa2 = 0.2`.
    pub fn few_quanta() -> Self {
        Self {
            kappa2: 0.2,
            ..Self::semiclassical()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() {
            return Err(Error::config("oscillator.omega must be finite"));
        }
        if !(self.kappa1.is_finite() && self.kappa1 >= 0.0) {
            return Err(Error::config("oscillator.kappa1 must be finite and >= 0"));
        }
        if !(self.kappa2.is_finite() && self.kappa2 > 0.0) {
            return Err(Error::config("oscillator.kappa2 must be finite and > 0"));
        }
        if !(self.drive.re.is_finite() && self.drive.im.is_finite()) {
            return Err(Error::config("oscillator drive must be finite"));
        }
        Ok(())
    }

    /// Radius `sqrt(kappa1 / (2 kappa2))` of the deterministic limit cycle.
    pub fn limit_cycle_radius(&self) -> f64 {
        (self.kappa1 / (2.0 * self.kappa2)).sqrt()
    }

    /// Amplitude of the local vacuum noise, `sqrt(3 kappa1 + 2 kappa2)`.
    pub fn local_noise_amplitude(&self) -> f64 {
        (3.0 * self.kappa1 + 2.0 * self.kappa2).sqrt()
    }

    pub fn has_drive(&self) -> bool {
        self.drive != Complex64::ZERO
    }
}

/// Lattice on which the oscillators sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// One-dimensional chain with periodic boundary conditions.
    #[default]
    Ring,
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Topology::Ring),
            other => Err(Error::config(format!(
                "unsupported topology {other:?} (only \"ring\" is available)"
            ))),
        }
    }
}

/// Dissipative coupling strength and its decay with distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    pub mu: f64,
    /// Attenuation coefficient; `0` is all-to-all, `f64::INFINITY` nearest-neighbour.
    pub gamma: f64,
    pub topology: Topology,
}

impl CouplingSpec {
    pub fn new(mu: f64, gamma: f64) -> Result<Self> {
        let c = Self {
            mu,
            gamma,
            topology: Topology::Ring,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn all_to_all(mu: f64) -> Self {
        Self {
            mu,
            gamma: 0.0,
            topology: Topology::Ring,
        }
    }

    pub fn uncoupled() -> Self {
        Self::all_to_all(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::config("coupling.mu must be finite and >= 0"));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::config("coupling.gamma must be >= 0"));
        }
        Ok(())
    }

    /// Relative coupling `lambda(d) = exp(-gamma (d - 1))` for `d >= 1`, zero on site.
    pub fn lambda(&self, distance: usize) -> f64 {
        match distance {
            0 => 0.0,
            // exact even for gamma = inf
            1 => 1.0,
            d => (-self.gamma * (d as f64 - 1.0)).exp(),
        }
    }
}

/// Shorter distance between 1-based sites `m` and `n` on a ring of `count` sites.
pub fn ring_distance(m: usize, n: usize, count: usize) -> Result<usize> {
    if m == 0 || n == 0 || m > count || n > count {
        return Err(Error::config(format!(
            "site indices ({m}, {n}) outside 1..={count}"
        )));
    }
    let diff = m.abs_diff(n);
    Ok(diff.min(count - diff))
}

/// Normalization `sum_{m=1}^{N} lambda_1m + 1`.
pub fn normalization(spec: &CouplingSpec, count: usize) -> f64 {
    let sum: f64 = (1..=count)
        .map(|m| spec.lambda(ring_distance(1, m, count).unwrap_or(0)))
        .sum();
    sum + 1.0
}

/// Symmetric `N x N` matrix of coupling strengths `mu_mn` (not yet divided by
/// the normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    size: usize,
    entries: Vec<f64>,
    normalization: f64,
}

impl CouplingMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Entry `mu_mn` for 1-based indices.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[(m - 1) * self.size + (n - 1)]
    }

    /// Normalized rate `mu_mn / N(gamma)` for 0-based indices.
    pub fn rate(&self, m: usize, n: usize) -> f64 {
        self.entries[m * self.size + n] / self.normalization
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// True when every off-diagonal entry is the same (the `gamma = 0` case).
    pub fn is_uniform(&self) -> bool {
        let first = if self.size > 1 { self.entries[1] } else { 0.0 };
        (0..self.size).all(|m| {
            (0..self.size).all(|n| m == n || self.entries[m * self.size + n] == first)
        })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }
}

/// Builds `mu_mn = mu (1 - delta_mn) exp(-gamma (d_mn - 1))` for a ring of `count` sites.
pub fn coupling_matrix(spec: &CouplingSpec, count: usize) -> Result<CouplingMatrix> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::config("oscillator count must be at least 1"));
    }
    let mut entries = vec![0.0; count * count];
    for m in 1..=count {
        for n in 1..=count {
            let d = ring_distance(m, n, count)?;
            entries[(m - 1) * count + (n - 1)] = spec.mu * spec.lambda(d);
        }
    }
    Ok(CouplingMatrix {
        size: count,
        entries,
        normalization: normalization(spec, count),
    })
}

/// Size, length and seeding of a Langevin ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_osc: usize,
    pub n_traj: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Integrator steps between recorded samples.
    pub record_stride: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_osc: 10,
            n_traj: 2000,
            dt: 0.05,
            t_final: 2000.0,
            seed: 0x5eed_c7a1,
            record_stride: 20,
        }
    }
}

impl EnsembleConfig {
    /// Checks sizes and the explicit-step stability guard
    /// `dt * max(|omega|, kappa1, kappa2 * kappa1 / (2 kappa2), mu) <= 0.05`.
    pub fn validate(&self, params: &OscillatorParams, coupling: &CouplingSpec) -> Result<()> {
        params.validate()?;
        coupling.validate()?;
        if self.n_osc == 0 {
            return Err(Error::config("ensemble.n_osc must be >= 1"));
        }
        if self.n_traj == 0 {
            return Err(Error::config("ensemble.n_traj must be >= 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("ensemble.dt must be > 0"));
        }
        // t_final = 0 is allowed and yields the initial record only
        if !(self.t_final.is_finite() && (self.t_final == 0.0 || self.t_final >= self.dt)) {
            return Err(Error::config("ensemble.t_final must be 0 or >= dt"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("ensemble.record_stride must be >= 1"));
        }
        let occupation = params.kappa1 / (2.0 * params.kappa2);
        let fastest = params
            .omega
            .abs()
            .max(params.kappa1)
            .max(params.kappa2 * occupation)
            .max(coupling.mu);
        if self.dt * fastest > STABILITY_LIMIT * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {} too large: dt * max rate = {:.4} exceeds {STABILITY_LIMIT}",
                self.dt,
                self.dt * fastest
            )));
        }
        Ok(())
    }

    /// Number of integrator steps, `round(t_final / dt)`.
    pub fn n_steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    /// Recorded times `k * record_stride * dt`.
    pub fn record_times(&self) -> Vec<f64> {
        let stride = self.record_stride as u64;
        (0..=self.n_steps() / stride)
            .map(|k| (k * stride) as f64 * self.dt)
            .collect()
    }

    /// Step index closest to time `t`, if `t` lies on the step grid.
    pub fn step_at(&self, t: f64) -> Option<u64> {
        let s = (t / self.dt).round();
        let tol = 1e-9 * self.dt.max(t.abs() * 1e-3);
        if s >= 0.0 && (s * self.dt - t).abs() <= tol.max(1e-12) && s as u64 <= self.n_steps() {
            Some(s as u64)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_distance_examples() {
        assert_eq!(ring_distance(1, 1, 8).unwrap(), 0);
        assert_eq!(ring_distance(1, 5, 8).unwrap(), 4);
        assert_eq!(ring_distance(1, 7, 8).unwrap(), 2);
        assert_eq!(ring_distance(7, 1, 8).unwrap(), 2);
    }

    #[test]
    fn ring_distance_rejects_out_of_range() {
        assert!(ring_distance(0, 1, 4).is_err());
        assert!(ring_distance(1, 5, 4).unwrap_err().is_config());
    }

    #[test]
    fn all_to_all_matrix() {
        let c = coupling_matrix(&CouplingSpec::all_to_all(0.3), 4).unwrap();
        for m in 1..=4 {
            for n in 1..=4 {
                let expected = if m == n { 0.0 } else { 0.3 };
                assert_eq!(c.get(m, n), expected);
            }
        }
        assert!(c.is_uniform());
        assert_eq!(c.normalization(), 4.0);
    }

    #[test]
    fn zero_mu_gives_zero_matrix() {
        let c = coupling_matrix(&CouplingSpec::new(0.0, 0.7).unwrap(), 6).unwrap();
        assert!(c.is_zero());
    }

    #[test]
    fn exponential_decay_entry() {
        let c = coupling_matrix(&CouplingSpec::new(1.0, 2f64.ln()).unwrap(), 5).unwrap();
        assert!((c.get(1, 3) - 0.5).abs() < 1e-15);
        assert_eq!(c.get(1, 2), 1.0);
    }

    #[test]
    fn normalization_limits() {
        assert_eq!(normalization(&CouplingSpec::all_to_all(1.0), 10), 10.0);
        let nn = CouplingSpec::new(1.0, f64::INFINITY).unwrap();
        assert_eq!(normalization(&nn, 10), 3.0);
        assert_eq!(normalization(&CouplingSpec::all_to_all(1.0), 1), 1.0);
        // large but finite gamma approaches the same limit
        let steep = CouplingSpec::new(1.0, 60.0).unwrap();
        assert_eq!(normalization(&steep, 10), 3.0);
    }

    #[test]
    fn topology_rejects_unknown() {
        assert_eq!("ring".parse::<Topology>().unwrap(), Topology::Ring);
        assert!("square".parse::<Topology>().unwrap_err().is_config());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(OscillatorParams::new(1.0, -0.1, 0.005, Complex64::ZERO).is_err());
        assert!(OscillatorParams::new(1.0, 0.1, 0.0, Complex64::ZERO).is_err());
        assert!(OscillatorParams::new(f64::NAN, 0.1, 0.1, Complex64::ZERO).is_err());
        assert!(CouplingSpec::new(-1.0, 0.0).is_err());
        assert!(CouplingSpec::new(1.0, -0.5).is_err());
    }

    #[test]
    fn stability_guard() {
        let p = OscillatorParams::semiclassical();
        let c = CouplingSpec::all_to_all(0.3);
        let mut cfg = EnsembleConfig {
            dt: 0.05,
            ..Default::default()
        };
        assert!(cfg.validate(&p, &c).is_ok());
        cfg.dt = 0.06;
        assert!(cfg.validate(&p, &c).is_err());
        cfg.dt = 0.01;
        cfg.record_stride = 0;
        assert!(cfg.validate(&p, &c).is_err());
    }

    #[test]
    fn record_grid() {
        let cfg = EnsembleConfig {
            dt: 0.5,
            t_final: 10.0,
            record_stride: 4,
            ..Default::default()
        };
        assert_eq!(cfg.record_times(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(cfg.step_at(6.0), Some(12));
        assert_eq!(cfg.step_at(6.1), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn coupling_symmetric_and_monotone(n in 1usize..24, mu in 0.0f64..2.0, gamma in 0.0f64..5.0) {
                let spec = CouplingSpec::new(mu, gamma).unwrap();
                let c = coupling_matrix(&spec, n).unwrap();
                for m in 1..=n {
                    prop_assert_eq!(c.get(m, m), 0.0);
                    for k in 1..=n {
                        prop_assert_eq!(c.get(m, k).to_bits(), c.get(k, m).to_bits());
                        prop_assert!(c.get(m, k) >= 0.0);
                    }
                }
                // non-increasing with distance from site 1
                let mut by_distance: Vec<(usize, f64)> = (2..=n)
                    .map(|k| (ring_distance(1, k, n).unwrap(), c.get(1, k)))
                    .collect();
                by_distance.sort_by(|a, b| a.0.cmp(&b.0));
                for w in by_distance.windows(2) {
                    prop_assert!(w[1].1 <= w[0].1);
                }
            }

            #[test]
            fn ring_distance_symmetric(n in 1usize..40, a in 1usize..40, b in 1usize..40) {
                prop_assume!(a <= n && b <= n);
                let d = ring_distance(a, b, n).unwrap();
                prop_assert_eq!(d, ring_distance(b, a, n).unwrap());
                prop_assert_eq!(d == 0, a == b);
                prop_assert!(d <= n / 2);
            }
        }
    }
}
