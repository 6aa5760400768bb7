//! Power spectrum of the complex order parameter.
//!
//! The transform is `X(w) = sum_j w_j x_j exp(+i w t_j)`, so a signal
//! rotating as `exp(-i w0 t)` peaks at `+w0`. Frequencies are angular, in
//! units of the oscillator frequency, and sorted ascending.
//!
//! Normalization: with `n` samples zero-padded to `M` points,
//! `P_k = |X_k|^2 / (M n)`, so `sum_k P_k = (1/n) sum_j |w_j x_j|^2`. With the
//! rectangular window this is the mean squared magnitude of the series.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest samples accepted by [`power_spectrum`].
pub const MIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumWindow {
    /// Suits series that die out inside the record, such as a decaying
    /// order parameter: the decay is its own taper.
    #[default]
    Rectangular,
    /// Suits stationary series; suppresses leakage from the record edges but
    /// down-weights the start of a decaying series.
    Hann,
}

impl SpectrumWindow {
    fn weight(self, j: usize, n: usize) -> f64 {
        match self {
            SpectrumWindow::Rectangular => 1.0,
            SpectrumWindow::Hann => {
                if n < 2 {
                    1.0
                } else {
                    let s = (PI * j as f64 / (n - 1) as f64).sin();
                    s * s
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub window: SpectrumWindow,
    /// Transform length as a multiple of the series length (rounded up to a power of two).
    pub padding: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            window: SpectrumWindow::Rectangular,
            padding: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// Angular frequencies, ascending.
    pub freq: Vec<f64>,
    pub power: Vec<f64>,
    pub peak_freq: f64,
    /// Full width at half maximum of the main peak, in angular frequency.
    pub fwhm: f64,
    /// `(1/n) sum_j |w_j x_j|^2`, evaluated in the time domain.
    pub series_power: f64,
}

impl PowerSpectrum {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Relative mismatch between [`total_power`](Self::total_power) and
    /// [`series_power`](Self::series_power).
    pub fn parseval_error(&self) -> f64 {
        let t = self.total_power();
        if self.series_power == 0.0 {
            t.abs()
        } else {
            ((t - self.series_power) / self.series_power).abs()
        }
    }
}

/// Power spectrum of a uniformly sampled complex series.
pub fn power_spectrum(
    times: &[f64],
    series: &[Complex64],
    options: &SpectrumOptions,
) -> Result<PowerSpectrum> {
    let n = series.len();
    if times.len() != n {
        return Err(Error::Spectrum("time and value lengths differ".into()));
    }
    if n < MIN_SAMPLES {
        return Err(Error::Spectrum(format!("{n} samples, need {MIN_SAMPLES}")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Spectrum("times must increase".into()));
    }
    for (j, &t) in times.iter().enumerate() {
        if ((t - times[0]) - j as f64 * dt).abs() > 1e-6 * dt {
            return Err(Error::Spectrum(format!("non-uniform sampling at index {j}")));
        }
    }
    let m = (n * options.padding.max(1)).next_power_of_two();
    let mut buf = vec![Complex64::ZERO; m];
    let mut series_power = 0.0;
    for (j, (b, &x)) in buf.iter_mut().zip(series).enumerate() {
        *b = x * options.window.weight(j, n);
        series_power += b.norm_sqr();
    }
    series_power /= n as f64;
    // The unnormalized inverse transform carries the exp(+i ...) kernel.
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    // Phase from the series not starting at t = 0 does not affect |X|^2.
    let scale = 1.0 / (m as f64 * n as f64);
    let half = m / 2;
    let dw = 2.0 * PI / (m as f64 * dt);
    let mut freq = Vec::with_capacity(m);
    let mut power = Vec::with_capacity(m);
    for i in 0..m {
        // fftshift: bins half..m are negative frequencies
        let k = (i + half) % m;
        let signed = if k >= half { k as isize - m as isize } else { k as isize };
        freq.push(signed as f64 * dw);
        power.push(buf[k].norm_sqr() * scale);
    }
    let peak = power
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > power[best] { i } else { best });
    let fwhm = half_max_width(&freq, &power, peak)?;
    Ok(PowerSpectrum {
        peak_freq: freq[peak],
        fwhm,
        freq,
        power,
        series_power,
    })
}

fn half_max_width(freq: &[f64], power: &[f64], peak: usize) -> Result<f64> {
    let half = 0.5 * power[peak];
    if !(half > 0.0) {
        return Err(Error::Spectrum("spectrum is identically zero".into()));
    }
    let cross = |i_in: usize, i_out: usize| {
        let (p0, p1) = (power[i_in], power[i_out]);
        freq[i_in] + (freq[i_out] - freq[i_in]) * (p0 - half) / (p0 - p1)
    };
    let left = (0..peak)
        .rev()
        .find(|&i| power[i] < half)
        .map(|i| cross(i + 1, i));
    let right = ((peak + 1)..power.len())
        .find(|&i| power[i] < half)
        .map(|i| cross(i - 1, i));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Spectrum("peak half maximum is not resolved".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, dt: f64, f: impl Fn(f64) -> Complex64) -> (Vec<f64>, Vec<Complex64>) {
        let t: Vec<f64> = (0..n).map(|j| j as f64 * dt).collect();
        let x = t.iter().map(|&t| f(t)).collect();
        (t, x)
    }

    #[test]
    fn pure_tone_peaks_at_its_frequency() {
        let (t, x) = series(1024, 0.5, |t| Complex64::from_polar(1.0, -t));
        let s = power_spectrum(&t, &x, &SpectrumOptions::default()).unwrap();
        let dw = s.freq[1] - s.freq[0];
        assert!((s.peak_freq - 1.0).abs() <= dw);
        assert!(s.parseval_error() < 1e-12);
    }

    #[test]
    fn width_grows_with_damping() {
        let opts = SpectrumOptions {
            window: SpectrumWindow::Rectangular,
            padding: 8,
        };
        let widths: Vec<f64> = [0.01, 0.03, 0.1]
            .iter()
            .map(|&g| {
                let (t, x) = series(4096, 0.25, |t| Complex64::from_polar((-g * t).exp(), -t));
                power_spectrum(&t, &x, &opts).unwrap().fwhm
            })
            .collect();
        assert!(widths[0] < widths[1] && widths[1] < widths[2]);
        // Lorentzian |1/(g + i dw)|^2 has full width 2g
        assert!((widths[2] / 0.2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn rectangular_total_is_mean_square() {
        let (t, x) = series(100, 1.0, |t| Complex64::new((0.3 * t).cos(), 0.1 * t));
        let s = power_spectrum(
            &t,
            &x,
            &SpectrumOptions {
                window: SpectrumWindow::Rectangular,
                padding: 1,
            },
        )
        .unwrap();
        let ms = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / 100.0;
        assert!((s.total_power() - ms).abs() < 1e-10 * ms);
    }

    #[test]
    fn rejects_bad_grids() {
        let (mut t, x) = series(80, 1.0, |_| Complex64::ONE);
        assert!(power_spectrum(&t[..40], &x[..40], &SpectrumOptions::default()).is_err());
        t[10] += 0.3;
        assert!(matches!(
            power_spectrum(&t, &x, &SpectrumOptions::default()),
            Err(Error::Spectrum(_))
        ));
    }

    #[test]
    fn window_names() {
        #[derive(Deserialize)]
        struct W {
            w: SpectrumWindow,
        }
        let w: W = toml::from_str("w = \"rectangular\"").unwrap();
        assert_eq!(w.w, SpectrumWindow::Rectangular);
    }
}
