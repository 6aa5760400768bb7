//! Phase-space histograms from ensemble snapshots.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::Snapshot;

use super::sync::error_mode;

/// Which variable of each trajectory is histogrammed.
///
/// Both sources are binned in quadrature coordinates: oscillator 1 as
/// `(q, p) = sqrt(2) (Re a_1, Im a_1)`, the error mode as
/// `(q_-, p_-) = (Re, Im)(a_1 - mean(a_2..a_N))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramSource {
    Oscillator1,
    ErrorMode,
}

impl HistogramSource {
    /// Short name used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            HistogramSource::Oscillator1 => "osc1",
            HistogramSource::ErrorMode => "error_mode",
        }
    }

    fn point(self, amplitudes: &[Complex64]) -> (f64, f64) {
        match self {
            HistogramSource::Oscillator1 => {
                let a = amplitudes[0] * std::f64::consts::SQRT_2;
                (a.re, a.im)
            }
            HistogramSource::ErrorMode => {
                let e = error_mode(amplitudes);
                (e.re, e.im)
            }
        }
    }
}

/// Normalized density on a square grid `[-h, h]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub source: HistogramSource,
    pub time: f64,
    pub bins: usize,
    pub half_width: f64,
    /// Row-major `[q_bin][p_bin]` probabilities, summing to 1 over the grid.
    pub density: Vec<f64>,
    pub samples: usize,
    /// Samples outside the grid (not counted in `density`).
    pub outside: usize,
}

impl Histogram2D {
    pub fn bin_width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins)
            .map(|i| -self.half_width + (i as f64 + 0.5) * w)
            .collect()
    }

    pub fn get(&self, iq: usize, ip: usize) -> f64 {
        self.density[iq * self.bins + ip]
    }

    pub fn marginal_q(&self) -> Vec<f64> {
        self.density.chunks(self.bins).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_p(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.bins];
        for row in self.density.chunks(self.bins) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m
    }

    /// Excess kurtosis of the `q` and `p` marginals.
    pub fn excess_kurtosis(&self) -> (f64, f64) {
        let c = self.bin_centers();
        (
            kurtosis(&c, &self.marginal_q()),
            kurtosis(&c, &self.marginal_p()),
        )
    }

    /// Root mean square distance from the origin, `sqrt(<q^2 + p^2>)`.
    pub fn spread(&self) -> f64 {
        let c = self.bin_centers();
        let mut s = 0.0;
        for (i, row) in self.density.chunks(self.bins).enumerate() {
            for (j, d) in row.iter().enumerate() {
                s += d * (c[i] * c[i] + c[j] * c[j]);
            }
        }
        s.sqrt()
    }

    /// `|<exp(i phi)>|` of the binned density, with `phi` the polar angle of
    /// the bin center. Zero for a ring-symmetric distribution.
    pub fn angular_anisotropy(&self) -> f64 {
        let c = self.bin_centers();
        let mut z = Complex64::ZERO;
        for (i, row) in self.density.chunks(self.bins).enumerate() {
            for (j, d) in row.iter().enumerate() {
                let v = Complex64::new(c[i], c[j]);
                let r = v.norm();
                if r > 0.0 {
                    z += v / r * d;
                }
            }
        }
        z.norm()
    }
}

fn kurtosis(x: &[f64], w: &[f64]) -> f64 {
    let mean: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
    let (mut m2, mut m4) = (0.0, 0.0);
    for (x, w) in x.iter().zip(w) {
        let d = (x - mean) * (x - mean);
        m2 += w * d;
        m4 += w * d * d;
    }
    if m2 == 0.0 {
        f64::NAN
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Bins one variable of every trajectory in `snapshot`.
///
/// `half_width = None` sizes the grid to the largest coordinate seen.
pub fn phase_space_histogram(
    snapshot: &Snapshot,
    source: HistogramSource,
    bins: usize,
    half_width: Option<f64>,
) -> Result<Histogram2D> {
    if snapshot.amplitudes.is_empty() {
        return Err(Error::Histogram(format!("empty snapshot at t = {}", snapshot.time)));
    }
    if bins == 0 {
        return Err(Error::Histogram("bin count must be >= 1".into()));
    }
    let points: Vec<(f64, f64)> = snapshot.amplitudes.iter().map(|a| source.point(a)).collect();
    let h = match half_width {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Histogram(format!("invalid half width {h}"))),
        None => {
            let m = points
                .iter()
                .fold(0.0f64, |m, &(q, p)| m.max(q.abs()).max(p.abs()));
            if m > 0.0 {
                m * (1.0 + 1e-9)
            } else {
                1.0
            }
        }
    };
    let w = 2.0 * h / bins as f64;
    let mut counts = vec![0usize; bins * bins];
    let mut inside = 0usize;
    for &(q, p) in &points {
        let iq = ((q + h) / w).floor();
        let ip = ((p + h) / w).floor();
        if iq >= 0.0 && ip >= 0.0 && (iq as usize) < bins && (ip as usize) < bins {
            counts[iq as usize * bins + ip as usize] += 1;
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(Error::Histogram("no samples inside the histogram range".into()));
    }
    let density = counts.iter().map(|&c| c as f64 / inside as f64).collect();
    Ok(Histogram2D {
        source,
        time: snapshot.time,
        bins,
        half_width: h,
        density,
        samples: points.len(),
        outside: points.len() - inside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;

    fn snapshot(amplitudes: Vec<Vec<Complex64>>) -> Snapshot {
        Snapshot {
            time: 1.0,
            traj: (0..amplitudes.len() as u64).collect(),
            amplitudes,
        }
    }

    #[test]
    fn delta_at_origin_fills_one_bin() {
        let s = snapshot(vec![vec![Complex64::ZERO; 3]; 20]);
        for source in [HistogramSource::Oscillator1, HistogramSource::ErrorMode] {
            let h = phase_space_histogram(&s, source, 8, None).unwrap();
            assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
            assert!((h.density.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_snapshot_is_error() {
        assert!(phase_space_histogram(&snapshot(vec![]), HistogramSource::ErrorMode, 8, None).is_err());
    }

    #[test]
    fn gaussian_marginals_have_small_excess_kurtosis() {
        let mut rng = NoiseStream::new(8, 0);
        let s = snapshot(
            (0..50_000)
                .map(|_| vec![rng.complex_increment(1.0), rng.complex_increment(1.0)])
                .collect(),
        );
        let h = phase_space_histogram(&s, HistogramSource::ErrorMode, 64, Some(6.0)).unwrap();
        let (kq, kp) = h.excess_kurtosis();
        assert!(kq.abs() < 0.1 && kp.abs() < 0.1, "{kq} {kp}");
        // <|a1 - a2|^2> = 2
        assert!((h.spread() - 2f64.sqrt()).abs() < 0.03);
        assert!(h.angular_anisotropy() < 0.02);
    }

    #[test]
    fn order_of_trajectories_is_irrelevant() {
        let mut rng = NoiseStream::new(2, 0);
        let a: Vec<Vec<Complex64>> = (0..300)
            .map(|_| vec![rng.complex_increment(1.0), rng.complex_increment(1.0)])
            .collect();
        let mut b = a.clone();
        b.reverse();
        let ha = phase_space_histogram(&snapshot(a), HistogramSource::Oscillator1, 16, None).unwrap();
        let hb = phase_space_histogram(&snapshot(b), HistogramSource::Oscillator1, 16, None).unwrap();
        assert_eq!(ha.density, hb.density);
    }
}
