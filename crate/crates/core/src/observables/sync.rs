//! Multi-body synchronization measure.
//!
//! The error-mode quadratures are `q_- = (q_1 - mean(q_2..q_N)) / sqrt(2)`
//! and likewise `p_-`. With `q = sqrt(2) Re a` this gives
//! `q_- + i p_- = a_1 - mean(a_2..a_N)`, so
//! `S_c = 1 / <q_-^2 + p_-^2> = 1 / <|a_1 - mean(a_2..a_N)|^2>`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::EnsembleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncMeasure {
    /// `S_c`; `+inf` when the error mode vanishes identically.
    pub value: f64,
    pub stderr: f64,
    pub t: f64,
    pub n_osc: usize,
    /// Set when `value` is the infinite sentinel.
    pub saturated: bool,
}

/// `a_1 - mean(a_2..a_N)` of one sample.
pub fn error_mode(amplitudes: &[Complex64]) -> Complex64 {
    let n = amplitudes.len();
    if n < 2 {
        return Complex64::ZERO;
    }
    amplitudes[0] - amplitudes[1..].iter().sum::<Complex64>() / (n - 1) as f64
}

fn measure(abs2: f64, abs4: f64, count: usize, t: f64, n_osc: usize) -> SyncMeasure {
    if abs2 == 0.0 {
        return SyncMeasure {
            value: f64::INFINITY,
            stderr: f64::INFINITY,
            t,
            n_osc,
            saturated: true,
        };
    }
    let value = 1.0 / abs2;
    let var = (abs4 - abs2 * abs2).max(0.0) / count as f64;
    SyncMeasure {
        value,
        stderr: value * var.sqrt() / abs2,
        t,
        n_osc,
        saturated: false,
    }
}

/// `S_c(N, t)` from the error-mode moments of an ensemble record.
pub fn sync_measure(record: &EnsembleRecord, t: f64) -> Result<SyncMeasure> {
    if record.n_osc < 2 {
        return Err(Error::Config("the synchronization measure needs N >= 2".into()));
    }
    let k = record.index_of(t)?;
    Ok(measure(
        record.error_mode.abs2[k],
        record.error_mode.abs4[k],
        record.n_traj,
        record.times[k],
        record.n_osc,
    ))
}

/// `S_c` from explicit samples, one amplitude vector per trajectory.
pub fn sync_from_samples(samples: &[Vec<Complex64>], t: f64) -> Result<SyncMeasure> {
    let Some(first) = samples.first() else {
        return Err(Error::Config("no samples".into()));
    };
    let n_osc = first.len();
    if n_osc < 2 {
        return Err(Error::Config("the synchronization measure needs N >= 2".into()));
    }
    let (mut s2, mut s4) = (0.0, 0.0);
    for a in samples {
        let e = error_mode(a).norm_sqr();
        s2 += e;
        s4 += e * e;
    }
    let n = samples.len() as f64;
    Ok(measure(s2 / n, s4 / n, samples.len(), t, n_osc))
}
