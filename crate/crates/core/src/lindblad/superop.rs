//! Liouvillian assembly.
//!
//! Density matrices are vectorized by stacking columns:
//! `vec(rho)[i + D j] = rho[i, j]` with `D` the Hilbert dimension, so that
//! `vec(A rho B) = (B^T (x) A) vec(rho)`.
//!
//! The dissipator uses the convention with a leading factor 2,
//! `L[o] rho = 2 o rho o^dag - o^dag o rho - rho o^dag o`, so every rate
//! enters the spectrum twice as strongly as in the `1/2` convention.

use num_complex::Complex64;

use super::fock::FockConfig;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::model::{coupling_matrix, CouplingSpec, OscillatorParams};

/// Which part of operator space a Liouvillian acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// All `D^2` matrix elements in column-stacking order.
    Full,
    /// Elements `|i><j|` with `n(i) - n(j) = k`, in column-stacking order.
    /// Without a coherent drive every term of the master equation maps such
    /// a block into itself.
    Sector { k: i64, pairs: Vec<(u32, u32)> },
}

/// Generator `d vec(rho)/dt = L vec(rho)` on one block.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CsrMatrix,
    fock: FockConfig,
    block: Block,
}

/// One term `coef * left * rho * right` of the master equation.
#[derive(Debug, Clone)]
pub struct SandwichTerm {
    pub coef: Complex64,
    pub left: CsrMatrix,
    pub right: CsrMatrix,
}

impl Liouvillian {
    /// Wraps an arbitrary generator on the full column-stacked space.
    pub fn from_full_matrix(matrix: CsrMatrix, fock: FockConfig) -> Result<Self> {
        let d = fock.hilbert_dim();
        if matrix.nrows() != d * d || matrix.ncols() != d * d {
            return Err(Error::Config(format!(
                "generator is {}x{}, expected {0}x{0} for Hilbert dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix,
            fock,
            block: Block::Full,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn fock(&self) -> &FockConfig {
        &self.fock
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Excitation-difference label, `None` for the full space.
    pub fn sector(&self) -> Option<i64> {
        match &self.block {
            Block::Full => None,
            Block::Sector { k, .. } => Some(*k),
        }
    }

    /// `(row, col)` of the density-matrix element at vector position `idx`.
    pub fn element(&self, idx: usize) -> (usize, usize) {
        match &self.block {
            Block::Full => {
                let d = self.fock.hilbert_dim();
                (idx % d, idx / d)
            }
            Block::Sector { pairs, .. } => {
                let (i, j) = pairs[idx];
                (i as usize, j as usize)
            }
        }
    }

    /// Restricts `rho` to this block.
    pub fn vectorize(&self, rho: &faer::Mat<Complex64>) -> Vec<Complex64> {
        (0..self.dim())
            .map(|idx| {
                let (i, j) = self.element(idx);
                rho[(i, j)]
            })
            .collect()
    }

    /// Density matrix with the block entries of `v` and zeros elsewhere.
    pub fn unvectorize(&self, v: &[Complex64]) -> faer::Mat<Complex64> {
        let d = self.fock.hilbert_dim();
        let mut rho = faer::Mat::<Complex64>::zeros(d, d);
        for (idx, &x) in v.iter().enumerate() {
            let (i, j) = self.element(idx);
            rho[(i, j)] = x;
        }
        rho
    }

    /// `||L^dag vec(I)|| / ||L||_F`: zero when the generator preserves the trace.
    /// Only meaningful for blocks containing the diagonal.
    pub fn trace_preservation_error(&self) -> f64 {
        let id: Vec<Complex64> = (0..self.dim())
            .map(|idx| {
                let (i, j) = self.element(idx);
                if i == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            })
            .collect();
        let r = self.matrix.adjoint_mul_vec(&id);
        let n = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = self.matrix.frobenius_norm();
        if scale == 0.0 {
            n
        } else {
            n / scale
        }
    }
}

/// `H = sum_n (omega a_n^dag a_n + Omega a_n + Omega^* a_n^dag)`.
pub fn build_hamiltonian(params: &OscillatorParams, fock: &FockConfig) -> Result<CsrMatrix> {
    fock.validate()?;
    let dim = fock.hilbert_dim();
    let mut h = CsrMatrix::zeros(dim, dim);
    for mode in 0..fock.n_modes {
        let a = fock.annihilation_on(mode);
        let ad = a.adjoint();
        let term = ad
            .matmul(&a)
            .scale(Complex64::new(params.omega, 0.0))
            .add(&a.scale(params.drive))
            .add(&ad.scale(params.drive.conj()));
        h = h.add(&term);
    }
    Ok(h)
}

/// Superoperator of `L[o]` on the full space, built from Kronecker products.
pub fn dissipator(o: &CsrMatrix) -> CsrMatrix {
    let d = o.nrows();
    let id = CsrMatrix::identity(d);
    let odo = o.adjoint().matmul(o);
    o.conj()
        .kron(o)
        .scale(Complex64::new(2.0, 0.0))
        .sub(&id.kron(&odo))
        .sub(&odo.transpose().kron(&id))
}

/// Superoperator of `-i [H, .]` on the full space.
pub fn commutator(h: &CsrMatrix) -> CsrMatrix {
    let id = CsrMatrix::identity(h.nrows());
    id.kron(h)
        .sub(&h.transpose().kron(&id))
        .scale(-Complex64::I)
}

/// Jump operators and their rates: `kappa1 L[a_n^dag]`, `kappa2 L[a_n^2]`
/// and `(mu_mn / norm) L[a_m - a_n]` for `m < n`.
pub fn jump_operators(
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    fock: &FockConfig,
) -> Result<Vec<(f64, CsrMatrix)>> {
    let rates = coupling_matrix(coupling, fock.n_modes)?;
    let ops: Vec<CsrMatrix> = (0..fock.n_modes).map(|m| fock.annihilation_on(m)).collect();
    let mut jumps = Vec::new();
    for a in &ops {
        if params.kappa1 != 0.0 {
            jumps.push((params.kappa1, a.adjoint()));
        }
        if params.kappa2 != 0.0 {
            jumps.push((params.kappa2, a.matmul(a)));
        }
    }
    for m in 0..fock.n_modes {
        for n in (m + 1)..fock.n_modes {
            let rate = rates.rate(m, n);
            if rate != 0.0 {
                jumps.push((rate, ops[m].sub(&ops[n])));
            }
        }
    }
    Ok(jumps)
}

/// The master equation as a list of `coef * A rho B` terms.
pub fn sandwich_terms(
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    fock: &FockConfig,
) -> Result<Vec<SandwichTerm>> {
    let h = build_hamiltonian(params, fock)?;
    let id = CsrMatrix::identity(fock.hilbert_dim());
    let mut terms = vec![
        SandwichTerm {
            coef: -Complex64::I,
            left: h.clone(),
            right: id.clone(),
        },
        SandwichTerm {
            coef: Complex64::I,
            left: id.clone(),
            right: h,
        },
    ];
    for (rate, o) in jump_operators(params, coupling, fock)? {
        let od = o.adjoint();
        let odo = od.matmul(&o);
        let r = Complex64::new(rate, 0.0);
        terms.push(SandwichTerm {
            coef: r * 2.0,
            left: o,
            right: od,
        });
        terms.push(SandwichTerm {
            coef: -r,
            left: odo.clone(),
            right: id.clone(),
        });
        terms.push(SandwichTerm {
            coef: -r,
            left: id.clone(),
            right: odo,
        });
    }
    Ok(terms)
}

fn check_sizes(fock: &FockConfig, dim: u64) -> Result<()> {
    fock.validate()?;
    // estimated stored entries per column, 24 bytes each
    let per_col = 6 + 8 * fock.n_modes as u64 + 12 * fock.n_modes.saturating_sub(1) as u64;
    fock.check_budget(dim.saturating_mul(per_col * 24))
}

/// Full Liouvillian, assembled from Kronecker products.
pub fn build_liouvillian(
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    fock: &FockConfig,
) -> Result<Liouvillian> {
    params.validate()?;
    coupling.validate()?;
    check_sizes(fock, fock.sizing().superop_dim)?;
    let mut l = commutator(&build_hamiltonian(params, fock)?);
    for (rate, o) in jump_operators(params, coupling, fock)? {
        l = l.add(&dissipator(&o).scale(Complex64::new(rate, 0.0)));
    }
    Ok(Liouvillian {
        matrix: l,
        fock: *fock,
        block: Block::Full,
    })
}

/// Liouvillian restricted to the excitation-difference sector `k`.
///
/// Requires a zero drive, which is what makes the sectors invariant. The
/// spectrum of the full Liouvillian is the union of all sector spectra, and
/// sector `-k` is the complex conjugate of sector `k`.
pub fn build_sector_liouvillian(
    params: &OscillatorParams,
    coupling: &CouplingSpec,
    fock: &FockConfig,
    k: i64,
) -> Result<Liouvillian> {
    params.validate()?;
    coupling.validate()?;
    if params.has_drive() {
        return Err(Error::Config(
            "excitation sectors are not invariant under a coherent drive".into(),
        ));
    }
    check_sizes(fock, fock.sector_dim(k))?;
    let terms = sandwich_terms(params, coupling, fock)?;
    let exc = fock.excitations();
    let dim = fock.hilbert_dim();
    if (dim as u64).saturating_mul(dim as u64) > u32::MAX as u64 {
        return Err(fock.sizing_error(u64::MAX));
    }
    let mut pairs = Vec::with_capacity(fock.sector_dim(k) as usize);
    let mut position = vec![u32::MAX; dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            if exc[i] as i64 - exc[j] as i64 == k {
                position[i + dim * j] = pairs.len() as u32;
                pairs.push((i as u32, j as u32));
            }
        }
    }
    // columns of each left factor: row k of A^T lists A[i, k]
    let lefts_t: Vec<CsrMatrix> = terms.iter().map(|t| t.left.transpose()).collect();
    let mut triplets = Vec::new();
    for (col, &(kk, ll)) in pairs.iter().enumerate() {
        for (term, left_t) in terms.iter().zip(&lefts_t) {
            for (i, a) in left_t.row(kk as usize) {
                for (j, b) in term.right.row(ll as usize) {
                    let row = position[i + dim * j];
                    debug_assert!(row != u32::MAX, "term leaves the sector");
                    if row != u32::MAX {
                        triplets.push((row as usize, col, term.coef * a * b));
                    }
                }
            }
        }
    }
    let n = pairs.len();
    Ok(Liouvillian {
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        fock: *fock,
        block: Block::Sector { k, pairs },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn params(omega: f64, kappa1: f64, kappa2: f64) -> OscillatorParams {
        OscillatorParams {
            omega,
            kappa1,
            kappa2,
            drive: Complex64::ZERO,
        }
    }

    #[test]
    fn hamiltonian_single_mode() {
        let f = FockConfig::new(3, 1).unwrap();
        let h = build_hamiltonian(&params(1.0, 0.1, 0.2), &f).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { c(i as f64) } else { Complex64::ZERO };
                assert!((h.get(i, j) - e).norm() < 1e-14);
            }
        }
        let mut p = params(0.0, 0.1, 0.2);
        p.drive = c(0.5);
        let f2 = FockConfig::new(2, 1).unwrap();
        let h = build_hamiltonian(&p, &f2).unwrap();
        assert_eq!(h.get(0, 1), c(0.5));
        assert_eq!(h.get(1, 0), c(0.5));
    }

    #[test]
    fn hamiltonian_is_hermitian_and_swap_symmetric() {
        let mut p = params(1.0, 0.1, 0.2);
        p.drive = Complex64::new(0.3, -0.2);
        let f = FockConfig::new(3, 2).unwrap();
        let h = build_hamiltonian(&p, &f).unwrap();
        let diff = h.sub(&h.adjoint());
        assert!(diff.frobenius_norm() < 1e-12);
        let swap = |i: usize| (i % 3) * 3 + i / 3;
        for (r, col, v) in h.triplets() {
            assert!((h.get(swap(r), swap(col)) - v).norm() < 1e-14);
        }
    }

    #[test]
    fn dissipator_examples() {
        let f = FockConfig::new(2, 1).unwrap();
        let a = f.annihilation_on(0);
        assert_eq!(dissipator(&a.scale(Complex64::ZERO)).nnz(), 0);
        // rho = |1><1| -> 2|0><0| - 2|1><1|
        let l = dissipator(&a);
        let mut rho = vec![Complex64::ZERO; 4];
        rho[1 + 2] = Complex64::ONE;
        let out = l.mul_vec(&rho);
        assert_eq!(out[0], c(2.0));
        assert_eq!(out[3], c(-2.0));
        assert_eq!(out[1], Complex64::ZERO);
        assert_eq!(out[2], Complex64::ZERO);
    }

    #[test]
    fn dissipator_is_traceless() {
        let f = FockConfig::new(4, 1).unwrap();
        let a = f.annihilation_on(0);
        let o = a.matmul(&a).add(&a.adjoint().scale(Complex64::new(0.3, 0.7)));
        let l = Liouvillian {
            matrix: dissipator(&o),
            fock: f,
            block: Block::Full,
        };
        assert!(l.trace_preservation_error() < 1e-15);
    }

    #[test]
    fn full_liouvillian_preserves_trace() {
        let f = FockConfig::new(3, 2).unwrap();
        let l = build_liouvillian(&params(1.0, 0.1, 0.2), &CouplingSpec::all_to_all(0.3), &f).unwrap();
        assert!(l.trace_preservation_error() < 1e-12);
        assert_eq!(l.dim(), 81);
    }

    #[test]
    fn sector_blocks_match_full_matrix() {
        let f = FockConfig::new(3, 2).unwrap();
        let p = params(1.0, 0.1, 0.2);
        let cpl = CouplingSpec::all_to_all(0.3);
        let full = build_liouvillian(&p, &cpl, &f).unwrap();
        let d = f.hilbert_dim();
        let mut total = 0;
        for k in -4..=4 {
            let s = build_sector_liouvillian(&p, &cpl, &f, k).unwrap();
            total += s.dim();
            for (r, col, v) in s.matrix().triplets() {
                let (i, j) = s.element(r);
                let (kk, ll) = s.element(col);
                let w = full.matrix().get(i + d * j, kk + d * ll);
                assert!((w - v).norm() < 1e-14);
            }
        }
        assert_eq!(total, full.dim());
    }

    #[test]
    fn drive_rejects_sectors() {
        let mut p = params(1.0, 0.1, 0.2);
        p.drive = c(0.1);
        let f = FockConfig::new(3, 1).unwrap();
        assert!(build_sector_liouvillian(&p, &CouplingSpec::uncoupled(), &f, 0)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn budget_is_enforced() {
        let f = FockConfig::new(6, 3).unwrap().with_budget(1 << 20);
        let err = build_liouvillian(&params(1.0, 0.1, 0.2), &CouplingSpec::all_to_all(0.3), &f).unwrap_err();
        assert!(matches!(err, Error::Sizing { .. }));
    }
}
