//! Phase fluctuations of oscillator 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::EnsembleRecord;

/// Largest fraction of trajectories allowed to have an undefined phase.
pub const MAX_NEAR_ZERO_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseEstimator {
    /// `-2 ln |<exp(i theta)>|`, the wrapped-Gaussian variance. Saturates
    /// once the phases cover the circle.
    #[default]
    Circular,
    /// Ordinary variance of the phase unwrapped along each trajectory, in the
    /// frame rotating at `omega`. Keeps growing linearly under phase diffusion.
    Unwrapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFluctuation {
    pub value: f64,
    pub stderr: f64,
    pub t: f64,
    pub estimator: PhaseEstimator,
}

/// Circular estimator on raw phase samples; `+inf` when the mean resultant
/// is indistinguishable from zero (`n R^2 < 9`).
pub fn circular_fluctuation(phases: &[f64]) -> f64 {
    let n = phases.len() as f64;
    let sum: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum();
    circular_from_mean(sum / n, phases.len()).0
}

fn circular_from_mean(mean: Complex64, n: usize) -> (f64, f64) {
    let r = mean.norm();
    let nf = n as f64;
    if nf * r * r < 9.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    // wrapped normal: <cos 2(theta - mu)> = R^4
    let var_r = ((1.0 + r.powi(4) - 2.0 * r * r) / (2.0 * nf)).max(0.0);
    (-2.0 * r.min(1.0).ln(), 2.0 * var_r.sqrt() / r)
}

/// `<delta^2 theta>` of oscillator `osc_index` (1-based; only oscillator 1 is
/// recorded) at time `t`.
pub fn phase_fluctuation(
    record: &EnsembleRecord,
    osc_index: usize,
    t: f64,
    estimator: PhaseEstimator,
) -> Result<PhaseFluctuation> {
    if osc_index != 1 {
        return Err(Error::Config(format!(
            "phase statistics are recorded for oscillator 1 only, not {osc_index}"
        )));
    }
    let k = record.index_of(t)?;
    let total = record.n_traj;
    let near_zero = record.phase.near_zero[k];
    if near_zero as f64 > MAX_NEAR_ZERO_FRACTION * total as f64 {
        return Err(Error::PhaseUndefined { near_zero, total });
    }
    let (value, stderr) = match estimator {
        PhaseEstimator::Circular => circular_from_mean(record.phase.unit_mean[k], total - near_zero),
        PhaseEstimator::Unwrapped => {
            let [m1, m2, m3, m4] = &record.phase.unwrapped;
            if m1.is_empty() {
                return Err(Error::Config(
                    "unwrapped phase was not tracked in this ensemble".into(),
                ));
            }
            let (m1, m2, m3, m4) = (m1[k], m2[k], m3[k], m4[k]);
            let var = (m2 - m1 * m1).max(0.0);
            let mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4);
            let se = ((mu4 - var * var).max(0.0) / total as f64).sqrt();
            (var, se)
        }
    };
    Ok(PhaseFluctuation {
        value,
        stderr,
        t: record.times[k],
        estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;

    #[test]
    fn identical_phases_give_zero() {
        assert!(circular_fluctuation(&[0.7; 100]) < 1e-14);
    }

    #[test]
    fn uniform_phases_give_sentinel() {
        let n = 1000;
        let phases: Vec<f64> = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        assert_eq!(circular_fluctuation(&phases), f64::INFINITY);
    }

    #[test]
    fn gaussian_calibration() {
        let mut rng = NoiseStream::new(5, 0);
        let phases: Vec<f64> = (0..10_000).map(|_| 0.2 * rng.normal()).collect();
        let v = circular_fluctuation(&phases);
        assert!((v / 0.04 - 1.0).abs() < 0.05, "{v}");
    }
}
