//! Master equation on a truncated Fock space.
//!
//! ```text
//! d rho/dt = -i [H, rho] + sum_n ( kappa1 L[a_n^dag] + kappa2 L[a_n^2] ) rho
//!            + sum_{m<n} (mu_mn / N) L[a_m - a_n] rho
//! L[o] rho = 2 o rho o^dag - o^dag o rho - rho o^dag o
//! ```
//!
//! Eigenvalues follow the usual convention: `Re lambda <= 0` is a decay rate
//! and `Im lambda` an oscillation frequency.

mod dynamics;
mod eigen;
mod fock;
mod sparse;
mod superop;

pub use dynamics::{
    evolve_rho, evolve_rho_with, minimal_cutoff, occupation, single_mode_steady_state,
    steady_state, steady_state_with, trace_distance, validate_cutoff, CutoffReport,
    EvolveOptions, SteadyState, MAX_DRIFT, MAX_TERMINAL_POPULATION, PSD_TOL, ZERO_TOL,
};
pub use eigen::{eigenpairs, spectrum, spectrum_with, EigenEstimate, EigenOptions};
pub use fock::{annihilation, FockConfig, SizingReport, DEFAULT_MEMORY_BUDGET};
pub use sparse::CsrMatrix;
pub use superop::{
    build_hamiltonian, build_liouvillian, build_sector_liouvillian, commutator, dissipator,
    jump_operators, sandwich_terms, Block, Liouvillian, SandwichTerm,
};
