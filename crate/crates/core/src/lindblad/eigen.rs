//! Eigenvalues of largest real part.
//!
//! Blocks up to [`EigenOptions::dense_limit`] are diagonalized densely. Larger
//! ones use a restarted Arnoldi iteration in Krylov-Schur form: after each
//! cycle the wanted Ritz vectors are orthonormalized and kept, and the
//! Rayleigh quotient is compressed onto them.

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use super::sparse::CsrMatrix;
use super::superop::Liouvillian;
use crate::error::{Error, Result};
use crate::rng::NoiseStream;

/// Eigenvalue with its residual `||L v - lambda v||` for the unit eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub value: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Largest dimension solved densely.
    pub dense_limit: usize,
    /// Krylov basis size; chosen from `k` when `None`.
    pub basis_size: Option<usize>,
    pub max_restarts: usize,
    /// Residual required of every returned eigenpair.
    pub tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            basis_size: None,
            max_restarts: 2000,
            tol: 1e-8,
        }
    }
}

/// `k` eigenvalues of largest real part, in descending order of real part.
///
/// On the full space a complex-conjugate pair is never split: if the cut
/// falls inside a pair, the partner is appended.
pub fn spectrum(l: &Liouvillian, k: usize) -> Result<Vec<EigenEstimate>> {
    spectrum_with(l, k, &EigenOptions::default())
}

pub fn spectrum_with(l: &Liouvillian, k: usize, opts: &EigenOptions) -> Result<Vec<EigenEstimate>> {
    Ok(eigenpairs(l, k, opts)?.into_iter().map(|(e, _)| e).collect())
}

/// Like [`spectrum_with`], also returning unit eigenvectors.
pub fn eigenpairs(
    l: &Liouvillian,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<(EigenEstimate, Vec<Complex64>)>> {
    let n = l.dim();
    if n == 0 || k == 0 {
        return Ok(Vec::new());
    }
    let pair_closed = l.sector().is_none();
    let want = if pair_closed { k + 1 } else { k }.min(n);
    let mut pairs = if n <= opts.dense_limit {
        dense_pairs(l.matrix(), want)?
    } else {
        krylov_pairs(l.matrix(), want, opts)?
    };
    if pair_closed {
        let keep = complete_pairs(&pairs, k);
        pairs.truncate(keep);
    }
    Ok(pairs)
}

/// Number of leading entries to keep so that the first `k` do not split a
/// conjugate pair.
fn complete_pairs(pairs: &[(EigenEstimate, Vec<Complex64>)], k: usize) -> usize {
    if pairs.len() <= k {
        return pairs.len();
    }
    let last = pairs[k - 1].0.value;
    let next = pairs[k].0.value;
    let scale = 1e-8 * last.norm().max(1.0);
    if last.im.abs() > scale && (next - last.conj()).norm() < scale {
        let partner_inside = pairs[..k - 1]
            .iter()
            .any(|(e, _)| (e.value - last.conj()).norm() < scale);
        if !partner_inside {
            return k + 1;
        }
    }
    k
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let av = a.mul_vec(v);
    av.iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn sort_desc_real(values: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .re
            .total_cmp(&values[i].re)
            .then(values[j].im.total_cmp(&values[i].im))
    });
    order
}

fn dense_pairs(a: &CsrMatrix, k: usize) -> Result<Vec<(EigenEstimate, Vec<Complex64>)>> {
    let evd = a
        .to_dense()
        .eigen()
        .map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<Complex64> = (0..s.nrows()).map(|i| s[i]).collect();
    let order = sort_desc_real(&values);
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| {
            let mut v: Vec<Complex64> = (0..u.nrows()).map(|r| u[(r, i)]).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|z| *z /= nv);
            let value = values[i];
            (
                EigenEstimate {
                    value,
                    residual: residual(a, value, &v),
                },
                v,
            )
        })
        .collect())
}

/// `w -= V h` with `h = V^dag w`, twice; returns the accumulated `h`.
fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> Vec<Complex64> {
    let mut total = vec![Complex64::ZERO; basis.len()];
    for _ in 0..2 {
        let h: Vec<Complex64> = basis
            .iter()
            .map(|v| v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum())
            .collect();
        for (v, &c) in basis.iter().zip(&h) {
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
        for (t, c) in total.iter_mut().zip(h) {
            *t += c;
        }
    }
    total
}

fn random_unit(n: usize, stream: u64) -> Vec<Complex64> {
    let mut rng = NoiseStream::new(0x4b72_796c_6f76, stream);
    let mut v: Vec<Complex64> = (0..n).map(|_| rng.complex_increment(1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    v
}

/// Orthonormalizes the columns of `y` (modified Gram-Schmidt, two passes).
fn orthonormal_columns(mut y: Mat<Complex64>) -> Mat<Complex64> {
    let (m, p) = (y.nrows(), y.ncols());
    for j in 0..p {
        for _ in 0..2 {
            for i in 0..j {
                let mut dot = Complex64::ZERO;
                for r in 0..m {
                    dot += y[(r, i)].conj() * y[(r, j)];
                }
                for r in 0..m {
                    let yi = y[(r, i)];
                    y[(r, j)] -= dot * yi;
                }
            }
        }
        let nrm = (0..m).map(|r| y[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..m {
            y[(r, j)] /= nrm;
        }
    }
    y
}

fn krylov_pairs(
    a: &CsrMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<(EigenEstimate, Vec<Complex64>)>> {
    let n = a.nrows();
    let m = opts
        .basis_size
        .unwrap_or((2 * k + 30).max(60))
        .clamp(k + 2, n.saturating_sub(1).max(k + 2));
    let mut basis: Vec<Vec<Complex64>> = vec![random_unit(n, 0)];
    let mut h = Mat::<Complex64>::zeros(m + 1, m);
    let mut filled = 0;
    let mut worst = f64::INFINITY;
    let mut breakdowns = 1;

    for restart in 0..opts.max_restarts {
        for j in filled..m {
            let mut w = a.mul_vec(&basis[j]);
            let wn = norm(&w);
            let coeffs = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] += c;
            }
            let mut beta = norm(&w);
            if beta <= 1e-13 * wn.max(1e-300) {
                // invariant subspace found; continue with a fresh direction
                w = random_unit(n, breakdowns);
                breakdowns += 1;
                orthogonalize(&basis, &mut w);
                let wn = norm(&w);
                w.iter_mut().for_each(|z| *z /= wn);
                beta = 0.0;
            } else {
                w.iter_mut().for_each(|z| *z /= beta);
            }
            h[(j + 1, j)] = Complex64::new(beta, 0.0);
            basis.push(w);
        }

        let hm = h.as_ref().submatrix(0, 0, m, m).to_owned();
        let evd = hm.eigen().map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let theta: Vec<Complex64> = (0..m).map(|i| s[i]).collect();
        let order = sort_desc_real(&theta);
        let unit_col = |i: usize| {
            let mut y: Vec<Complex64> = (0..m).map(|r| u[(r, i)]).collect();
            let ny = norm(&y);
            y.iter_mut().for_each(|z| *z /= ny);
            y
        };
        let estimate = |y: &[Complex64]| -> f64 {
            (0..m)
                .map(|c| h[(m, c)] * y[c])
                .sum::<Complex64>()
                .norm()
        };
        let wanted: Vec<(Complex64, Vec<Complex64>)> = order[..k]
            .iter()
            .map(|&i| (theta[i], unit_col(i)))
            .collect();
        worst = wanted.iter().map(|(_, y)| estimate(y)).fold(0.0, f64::max);

        if worst <= opts.tol || restart + 1 == opts.max_restarts {
            let mut out = Vec::with_capacity(k);
            for (value, y) in &wanted {
                let mut x = vec![Complex64::ZERO; n];
                for (c, v) in y.iter().zip(&basis) {
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += c * vi;
                    }
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|z| *z /= nx);
                let r = residual(a, *value, &x);
                out.push((
                    EigenEstimate {
                        value: *value,
                        residual: r,
                    },
                    x,
                ));
            }
            let true_worst = out.iter().map(|(e, _)| e.residual).fold(0.0, f64::max);
            if true_worst <= opts.tol {
                return Ok(out);
            }
            worst = worst.max(true_worst);
            if restart + 1 == opts.max_restarts {
                break;
            }
        }

        // thick restart on the leading Ritz vectors
        let keep = (k + (m - k) / 2).min(m - 1);
        let mut y = Mat::<Complex64>::zeros(m, keep);
        for (c, &i) in order[..keep].iter().enumerate() {
            let col = unit_col(i);
            for r in 0..m {
                y[(r, c)] = col[r];
            }
        }
        let q = orthonormal_columns(y);
        let mut new_basis = Vec::with_capacity(m + 1);
        for c in 0..keep {
            let mut x = vec![Complex64::ZERO; n];
            for (r, v) in basis.iter().take(m).enumerate() {
                let coef = q[(r, c)];
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += coef * vi;
                }
            }
            new_basis.push(x);
        }
        new_basis.push(basis.pop().expect("basis has m + 1 vectors"));
        let compressed = q.adjoint() * &hm * &q;
        let mut hn = Mat::<Complex64>::zeros(m + 1, m);
        for r in 0..keep {
            for c in 0..keep {
                hn[(r, c)] = compressed[(r, c)];
            }
        }
        for c in 0..keep {
            hn[(keep, c)] = (0..m).map(|r| h[(m, r)] * q[(r, c)]).sum();
        }
        h = hn;
        basis = new_basis;
        filled = keep;
    }
    Err(Error::EigenNonConvergence {
        iterations: opts.max_restarts,
        worst_residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fock::FockConfig;
    use super::super::superop::{
        build_hamiltonian, build_liouvillian, build_sector_liouvillian, commutator,
    };
    use super::*;
    use crate::model::{CouplingSpec, OscillatorParams};

    fn params(omega: f64, kappa1: f64, kappa2: f64) -> OscillatorParams {
        OscillatorParams {
            omega,
            kappa1,
            kappa2,
            drive: Complex64::ZERO,
        }
    }

    #[test]
    fn pure_hamiltonian_spectrum_is_imaginary_level_differences() {
        let p = params(1.0, 0.1, 0.2);
        let f = FockConfig::new(3, 1).unwrap();
        let h = build_hamiltonian(&p, &f).unwrap();
        let l = Liouvillian::from_full_matrix(commutator(&h), f).unwrap();
        let spec = spectrum(&l, 9).unwrap();
        let mut im: Vec<i64> = spec.iter().map(|e| e.value.im.round() as i64).collect();
        im.sort();
        assert_eq!(im, vec![-2, -1, -1, 0, 0, 0, 1, 1, 2]);
        assert!(spec.iter().all(|e| e.value.re.abs() < 1e-12));
    }

    #[test]
    fn single_mode_has_unique_zero_and_decaying_rest() {
        let f = FockConfig::new(8, 1).unwrap();
        let l = build_liouvillian(&params(1.0, 0.1, 0.2), &CouplingSpec::uncoupled(), &f).unwrap();
        let spec = spectrum(&l, 64).unwrap();
        assert_eq!(spec.len(), 64);
        assert_eq!(spec.iter().filter(|e| e.value.norm() < 1e-10).count(), 1);
        assert!(spec[1..].iter().all(|e| e.value.re < 0.0));
        assert!(spec.iter().all(|e| e.residual < 1e-8));
        // conjugate symmetry
        for e in &spec {
            assert!(spec.iter().any(|o| (o.value - e.value.conj()).norm() < 1e-8));
        }
    }

    #[test]
    fn krylov_agrees_with_dense() {
        let f = FockConfig::new(5, 2).unwrap();
        let p = params(1.0, 0.1, 0.2);
        let cpl = CouplingSpec::all_to_all(0.3);
        for k in [0, 1] {
            let l = build_sector_liouvillian(&p, &cpl, &f, k).unwrap();
            let dense = spectrum(&l, 4).unwrap();
            let opts = EigenOptions {
                dense_limit: 0,
                basis_size: Some(30),
                ..Default::default()
            };
            let kry = spectrum_with(&l, 4, &opts).unwrap();
            for (a, b) in dense.iter().zip(&kry) {
                assert!((a.value - b.value).norm() < 1e-8, "{a:?} {b:?}");
                assert!(b.residual < 1e-8);
            }
        }
    }

    #[test]
    fn pair_completion() {
        let e = |re: f64, im: f64| {
            (
                EigenEstimate {
                    value: Complex64::new(re, im),
                    residual: 0.0,
                },
                Vec::new(),
            )
        };
        let v = vec![e(0.0, 0.0), e(-0.1, 1.0), e(-0.1, -1.0), e(-0.2, 0.0)];
        assert_eq!(complete_pairs(&v, 2), 3);
        assert_eq!(complete_pairs(&v, 3), 3);
        assert_eq!(complete_pairs(&v, 1), 1);
    }
}
