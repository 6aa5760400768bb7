//! Figure-level quantities computed from ensemble records.
//!
//! Quadrature convention throughout: `q = (a + a*) / sqrt(2)`,
//! `p = (a - a*) / (i sqrt(2))`, so a coherent state has variance 1/2 per
//! quadrature.

mod fit;
mod histogram;
mod order;
mod phase;
mod spectrum;
mod sync;

pub use fit::{default_window, fit_gamma, linear_fit, noise_floor, DecayFit, FitWindow, LinearFit};
pub use histogram::{phase_space_histogram, Histogram2D, HistogramSource};
pub use order::{order_parameter, order_parameter_modulus};
pub use phase::{circular_fluctuation, phase_fluctuation, PhaseEstimator, PhaseFluctuation};
pub use spectrum::{power_spectrum, PowerSpectrum, SpectrumOptions, SpectrumWindow};
pub use sync::{error_mode, sync_from_samples, sync_measure, SyncMeasure};
