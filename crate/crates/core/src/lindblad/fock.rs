//! Truncated multi-mode Fock space.
//!
//! Basis states `|n_1, ..., n_N>` with `0 <= n_k < d` are indexed with mode 1
//! most significant: `index = sum_k n_k d^(N-k)`.

use serde::Serialize;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Default memory budget for one superoperator, in bytes.
pub const DEFAULT_MEMORY_BUDGET: u64 = 3 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockConfig {
    /// Per-mode dimension `d`.
    pub cutoff: usize,
    pub n_modes: usize,
    pub memory_budget: u64,
}

/// Dimensions of a truncated space, reported before anything is allocated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizingReport {
    pub cutoff: usize,
    pub n_modes: usize,
    pub hilbert_dim: u64,
    /// `hilbert_dim^2`
    pub superop_dim: u64,
    /// Dimension of each excitation-difference block `k = 0, 1, 2`.
    pub sector_dims: [u64; 3],
    /// Estimated bytes of the full sparse superoperator.
    pub sparse_bytes: u64,
    /// Bytes of a dense superoperator.
    pub dense_bytes: u64,
}

impl FockConfig {
    pub fn new(cutoff: usize, n_modes: usize) -> Result<Self> {
        let f = Self {
            cutoff,
            n_modes,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_budget(mut self, bytes: u64) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(Error::Config(format!("Fock cutoff {} must be >= 2", self.cutoff)));
        }
        if self.n_modes == 0 {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.checked_hilbert_dim().is_none() {
            return Err(self.sizing_error(u64::MAX));
        }
        Ok(())
    }

    fn checked_hilbert_dim(&self) -> Option<u64> {
        (self.cutoff as u64).checked_pow(self.n_modes as u32)
    }

    /// `d^N`
    pub fn hilbert_dim(&self) -> usize {
        self.checked_hilbert_dim().expect("validated dimension") as usize
    }

    /// Excitation number `sum_k n_k` of every basis state.
    pub fn excitations(&self) -> Vec<usize> {
        let d = self.cutoff;
        (0..self.hilbert_dim())
            .map(|mut i| {
                let mut s = 0;
                for _ in 0..self.n_modes {
                    s += i % d;
                    i /= d;
                }
                s
            })
            .collect()
    }

    /// Number of basis states per excitation number.
    fn excitation_counts(&self) -> Vec<u64> {
        let max = self.n_modes * (self.cutoff - 1);
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        for _ in 0..self.n_modes {
            let mut next = vec![0u64; max + 1];
            for (n, &c) in counts.iter().enumerate() {
                for k in 0..self.cutoff {
                    if n + k <= max {
                        next[n + k] += c;
                    }
                }
            }
            counts = next;
        }
        counts
    }

    /// Number of density-matrix elements `|i><j|` with `n(i) - n(j) = k`.
    pub fn sector_dim(&self, k: i64) -> u64 {
        let c = self.excitation_counts();
        let k = k.unsigned_abs() as usize;
        (k..c.len()).map(|n| c[n] * c[n - k]).sum()
    }

    pub fn sizing(&self) -> SizingReport {
        let h = self.checked_hilbert_dim().unwrap_or(u64::MAX);
        let s = h.saturating_mul(h);
        // roughly 6 + 5 N stored entries per column of the superoperator
        let per_col = 6 + 5 * self.n_modes as u64 + self.n_modes.saturating_sub(1) as u64 * 4;
        SizingReport {
            cutoff: self.cutoff,
            n_modes: self.n_modes,
            hilbert_dim: h,
            superop_dim: s,
            sector_dims: [self.sector_dim(0), self.sector_dim(1), self.sector_dim(2)],
            sparse_bytes: s.saturating_mul(per_col * 24),
            dense_bytes: s.saturating_mul(s).saturating_mul(16),
        }
    }

    pub(crate) fn sizing_error(&self, required: u64) -> Error {
        Error::Sizing {
            what: format!("superoperator for N = {}, d = {}", self.n_modes, self.cutoff),
            required_bytes: required,
            budget_bytes: self.memory_budget,
        }
    }

    /// Fails if `bytes` exceed the budget.
    pub fn check_budget(&self, bytes: u64) -> Result<()> {
        if bytes > self.memory_budget {
            Err(self.sizing_error(bytes))
        } else {
            Ok(())
        }
    }

    /// `a_mode` on the full space (`mode` 0-based).
    pub fn annihilation_on(&self, mode: usize) -> CsrMatrix {
        self.embed(&annihilation(self.cutoff), mode)
    }

    /// `I (x) ... (x) op (x) ... (x) I` with `op` in slot `mode` (0-based).
    pub fn embed(&self, op: &CsrMatrix, mode: usize) -> CsrMatrix {
        assert!(mode < self.n_modes);
        let d = self.cutoff;
        let left = CsrMatrix::identity(d.pow(mode as u32));
        let right = CsrMatrix::identity(d.pow((self.n_modes - mode - 1) as u32));
        left.kron(op).kron(&right)
    }
}

/// Truncated annihilation operator: `sqrt(k)` at `(k-1, k)`.
pub fn annihilation(d: usize) -> CsrMatrix {
    CsrMatrix::from_triplets(
        d,
        d,
        (1..d)
            .map(|k| (k - 1, k, Complex64::new((k as f64).sqrt(), 0.0)))
            .collect(),
    )
}
