//! Small dense linear-algebra helpers.
//!
//! Matrices are column-major `Vec`s. Eigendecompositions go through
//! nalgebra in `f64`; the Hermitian solve is generic so it can run on the
//! per-frame path.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column-major `n x n`, column `i` pairs with `values[i]`.
    pub vectors: Vec<Complex64>,
    pub n: usize,
}

impl HermitianEigen {
    pub fn vector(&self, i: usize) -> &[Complex64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }
}

/// `a` is column-major `n x n` and assumed Hermitian.
pub fn hermitian_eigen(a: &[Complex64], n: usize) -> HermitianEigen {
    assert_eq!(a.len(), n * n);
    let m = DMatrix::from_column_slice(n, n, a);
    // symmetrize against rounding in the caller's construction
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        values.push(eig.eigenvalues[i]);
        let col = eig.eigenvectors.column(i);
        // first non-negligible component real and positive
        let pivot = col.iter().copied().find(|z| z.norm() > 1e-9).unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        vectors.extend(col.iter().map(|z| z * phase));
    }
    HermitianEigen { values, vectors, n }
}

/// Kronecker product of column-major `a` (`p x p`) and `b` (`r x r`).
pub fn kron(a: &[Complex64], p: usize, b: &[Complex64], r: usize) -> Vec<Complex64> {
    let n = p * r;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for ja in 0..p {
        for ia in 0..p {
            let av = a[ja * p + ia];
            for jb in 0..r {
                for ib in 0..r {
                    out[(ja * r + jb) * n + ia * r + ib] = av * b[jb * r + ib];
                }
            }
        }
    }
    out
}

/// Solves `A x = b` for Hermitian positive-definite column-major `A` by
/// Cholesky factorization. `A` is overwritten with its factor.
pub fn hpd_solve_in_place<T: Real>(a: &mut [C<T>], n: usize, b: &mut [C<T>]) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    // lower factor L stored in the lower triangle, A = L L^H
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d = d - a[k * n + j].norm_sqr();
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Estimation(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = C::new(d, T::zero());
        for i in (j + 1)..n {
            let mut s = a[j * n + i];
            for k in 0..j {
                s = s - a[k * n + i] * a[k * n + j].conj();
            }
            a[j * n + i] = s / d;
        }
    }
    // L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i].re;
    }
    // L^H x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - a[i * n + k].conj() * b[k];
        }
        b[i] = s / a[i * n + i].re;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hpd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let b: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += b[k * n + i] * b[k * n + j].conj();
                }
                a[j * n + i] = s;
            }
            a[i * n + i] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_solve_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 9;
        let a = random_hpd(n, &mut rng);
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                b[i] += a[j * n + i] * x[j];
            }
        }
        let mut f = a.clone();
        hpd_solve_in_place(&mut f, n, &mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)];
        let mut b = vec![Complex64::new(1.0, 0.0); 2];
        assert!(hpd_solve_in_place(&mut a, 2, &mut b).is_err());
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 6;
        let a = random_hpd(n, &mut rng);
        let e = hermitian_eigen(&a, n);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += e.vectors[k * n + i] * e.values[k] * e.vectors[k * n + j].conj();
                }
                assert!((s - a[j * n + i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kron_of_identities() {
        let i2 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let k = kron(&i2, 2, &i2, 2);
        for j in 0..4 {
            for i in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(k[j * 4 + i].re, expect);
            }
        }
    }
}
