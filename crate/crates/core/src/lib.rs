//! Coupled quantum van der Pol oscillators on a ring.
//!
//! Two engines simulate the same model: [`sde`] integrates Langevin
//! trajectories in the semiclassical regime and [`lindblad`] builds the
//! master-equation generator on a truncated Fock space. [`observables`]
//! turns ensemble records into decay rates, spectra, synchronization
//! measures and histograms; [`oracle`] checks both engines against
//! independent calculations.
//!
//! ```
//! use tcvdp::model::{CouplingSpec, EnsembleConfig, OscillatorParams};
//! use tcvdp::observables::order_parameter_modulus;
//! use tcvdp::sde::simulate_ensemble;
//!
//! let cfg = EnsembleConfig { n_osc: 4, n_traj: 32, t_final: 10.0, ..Default::default() };
//! let record = simulate_ensemble(&cfg, &OscillatorParams::semiclassical(), &CouplingSpec::all_to_all(0.3))?;
//! let r = order_parameter_modulus(&record);
//! assert!(r[r.len() - 1] < r[0]);
//! # Ok::<(), tcvdp::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/langevin.md")]
    mod langevin {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/master_equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
