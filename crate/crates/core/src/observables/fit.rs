//! Exponential decay fits of `|r(t)|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest samples accepted by [`fit_gamma`].
pub const MIN_FIT_POINTS: usize = 10;

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// `1` when the data have no variance to explain.
    pub r_squared: f64,
    pub n_points: usize,
}

/// Fits a straight line; needs at least two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Fit("x and y lengths differ".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Fit(format!("{n} points cannot define a line")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - slope * xi - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        let se = (s2 / sxx).sqrt();
        (se, (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        n_points: n,
    })
}

/// Result of fitting `|r(t)| ~ A exp(-Gamma t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma_eff: f64,
    pub gamma_stderr: f64,
    /// `ln A`
    pub log_amplitude: f64,
    pub r_squared: f64,
    /// Requested `(t_start, t_end)`.
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Optional overrides of the automatic fit window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: Option<f64>,
    pub end: Option<f64>,
}

/// Monte Carlo noise floor `3 R0 / sqrt(n_traj)` of a mean amplitude.
pub fn noise_floor(radius: f64, n_traj: usize) -> f64 {
    3.0 * radius / (n_traj as f64).sqrt()
}

/// Resolves the fit window: starts at `5 / kappa1` (after the transient) and
/// ends at the last sample before `|r|` first drops below `floor`.
/// Explicit bounds in `overrides` win.
pub fn default_window(
    times: &[f64],
    amplitude: &[f64],
    kappa1: f64,
    floor: f64,
    overrides: FitWindow,
) -> Result<(f64, f64)> {
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::Fit("empty series".into()));
    };
    let start = overrides.start.unwrap_or(if kappa1 > 0.0 {
        first + 5.0 / kappa1
    } else {
        first
    });
    let end = match overrides.end {
        Some(e) => e,
        None => {
            let mut end = last;
            let mut prev = start;
            for (&t, &a) in times.iter().zip(amplitude) {
                if t < start {
                    continue;
                }
                if a < floor {
                    end = prev;
                    break;
                }
                prev = t;
            }
            end
        }
    };
    if !(end > start) {
        return Err(Error::Fit(format!(
            "empty fit window [{start}, {end}]: amplitude reaches the noise floor before the transient ends"
        )));
    }
    Ok((start, end))
}

/// Least-squares fit of `ln|r|` against `t` over `window`.
///
/// Every sample in the window must exceed `floor`, and the window must hold
/// at least [`MIN_FIT_POINTS`] samples.
pub fn fit_gamma(
    times: &[f64],
    amplitude: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Result<DecayFit> {
    if times.len() != amplitude.len() {
        return Err(Error::Fit("time and amplitude lengths differ".into()));
    }
    let (t0, t1) = window;
    let eps = 1e-9 * t0.abs().max(t1.abs()).max(1.0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &a) in times.iter().zip(amplitude) {
        if t < t0 - eps || t > t1 + eps {
            continue;
        }
        if !(a > floor) || !(a > 0.0) {
            return Err(Error::Fit(format!(
                "|r| = {a:e} at t = {t} is not above the noise floor {floor:e}"
            )));
        }
        x.push(t);
        y.push(a.ln());
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "window [{t0}, {t1}] holds {} samples, need {MIN_FIT_POINTS}",
            x.len()
        )));
    }
    let line = linear_fit(&x, &y)?;
    Ok(DecayFit {
        gamma_eff: -line.slope,
        gamma_stderr: line.slope_stderr,
        log_amplitude: line.intercept,
        r_squared: line.r_squared,
        window,
        n_points: line.n_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(0.0, 100.0, 101);
        let a: Vec<f64> = t.iter().map(|t| 3.0 * (-0.01 * t).exp()).collect();
        let fit = fit_gamma(&t, &a, (0.0, 100.0), 0.0).unwrap();
        assert!((fit.gamma_eff - 0.01).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.log_amplitude - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_amplitude() {
        let t = grid(0.0, 50.0, 20);
        let a = vec![2.5; 20];
        let fit = fit_gamma(&t, &a, (0.0, 50.0), 0.1).unwrap();
        assert_eq!(fit.gamma_eff, 0.0);
    }

    #[test]
    fn too_short_or_below_floor() {
        let t = grid(0.0, 9.0, 10);
        let a = vec![1.0; 10];
        assert!(fit_gamma(&t, &a, (0.0, 8.0), 0.0).is_err());
        let mut b = a.clone();
        b[4] = 0.01;
        assert!(matches!(fit_gamma(&t, &b, (0.0, 9.0), 0.1), Err(Error::Fit(_))));
    }

    #[test]
    fn default_window_stops_at_floor() {
        let t = grid(0.0, 1000.0, 1001);
        let a: Vec<f64> = t.iter().map(|t| (-0.01 * t).exp()).collect();
        let floor = (-5.0f64).exp();
        let (s, e) = default_window(&t, &a, 0.1, floor, FitWindow::default()).unwrap();
        assert_eq!(s, 50.0);
        assert_eq!(e, 500.0);
        let forced = FitWindow {
            start: Some(10.0),
            end: Some(20.0),
        };
        assert_eq!(default_window(&t, &a, 0.1, floor, forced).unwrap(), (10.0, 20.0));
    }

    #[test]
    fn linear_fit_standard_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.1, 1.9, 3.2, 3.8];
        let f = linear_fit(&x, &y).unwrap();
        // textbook values for this data set
        assert!((f.slope - 0.94).abs() < 1e-12);
        assert!((f.intercept - 0.15).abs() < 1e-12);
        assert!(f.r_squared > 0.97 && f.r_squared < 1.0);
        assert!(f.slope_stderr > 0.0);
    }

    proptest! {
        #[test]
        fn shift_invariance(gamma in 1e-4f64..0.1, shift in -500.0f64..500.0, amp in 0.1f64..10.0) {
            let t = grid(0.0, 200.0, 41);
            let a: Vec<f64> = t.iter().map(|t| amp * (-gamma * t).exp()).collect();
            let ts: Vec<f64> = t.iter().map(|t| t + shift).collect();
            let f0 = fit_gamma(&t, &a, (0.0, 200.0), 0.0).unwrap();
            let f1 = fit_gamma(&ts, &a, (shift, 200.0 + shift), 0.0).unwrap();
            prop_assert!((f0.gamma_eff - gamma).abs() < 1e-11);
            prop_assert!((f1.gamma_eff - f0.gamma_eff).abs() < 1e-10);
        }
    }
}
