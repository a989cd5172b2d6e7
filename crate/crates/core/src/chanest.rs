//! Wiener channel estimation with soft-symbol feedback.
//!
//! The estimator sees the whole grid as pilots: known pilot values at pilot
//! positions and precoded soft symbols at data positions, with the residual
//! symbol uncertainty folded into the noise term through `Lambda`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CovarianceModel, LowRankFactor};
use crate::error::{check_len, Error, Result};
use crate::fec::SoftSymbolFrame;
use crate::frame::PilotPattern;
use crate::linalg::hpd_solve_in_place;
use crate::precoding::PrecodingBasis;
use crate::scalar::{cast_c, Real, C};

/// How the receiver obtains its channel knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMode {
    #[default]
    PerfectCsi,
    PilotOnly,
    Iterative,
}

impl EstimationMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimationMode::PerfectCsi => "perfect-csi",
            EstimationMode::PilotOnly => "pilot-only",
            EstimationMode::Iterative => "iterative",
        }
    }
}

impl std::fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect-csi" => Ok(EstimationMode::PerfectCsi),
            "pilot-only" => Ok(EstimationMode::PilotOnly),
            "iterative" => Ok(EstimationMode::Iterative),
            _ => Err(Error::Config(format!("unknown estimation mode {s:?}"))),
        }
    }
}

/// Diagonal of `D~ = diag(P_p p + P_d S b~)`.
pub fn build_feedback<T: Real>(
    pattern: &PilotPattern<T>,
    basis: &PrecodingBasis<T>,
    soft: &[C<T>],
) -> Result<Vec<C<T>>> {
    check_len("soft symbols", pattern.n_data(), soft.len())?;
    let precoded = basis.apply(soft)?;
    pattern.multiplex(&precoded)
}

/// Diagonal of `Lambda`: zero on pilots, `1 - sigma_b~^2` on data.
pub fn build_lambda<T: Real>(pattern: &PilotPattern<T>, soft_variance: T) -> Vec<T> {
    let c = T::one() - soft_variance;
    let mut out = vec![c; pattern.grid_len()];
    for &k in pattern.pilot_index() {
        out[k] = T::zero();
    }
    out
}

#[derive(Debug, Clone)]
enum Route<T> {
    /// Column-major `R_g`.
    Dense(Vec<C<T>>),
    /// `R_g ~ U diag(values) U^H`, `rows` row-major `len x rank`.
    LowRank { values: Vec<T>, rows: Vec<C<T>>, rank: usize },
}

/// `g^ = R_g D~^H (D~ R_g D~^H + Lambda + sigma^2 I)^{-1} y`.
#[derive(Debug, Clone)]
pub struct WienerEstimator<T> {
    len: usize,
    route: Route<T>,
}

impl<T: Real> WienerEstimator<T> {
    /// Full covariance, dense Cholesky solve of size `MN`.
    pub fn dense(cov: &CovarianceModel) -> Self {
        Self::from_matrix(&cov.dense(), cov.len()).expect("square covariance")
    }

    /// Arbitrary column-major Hermitian PSD covariance.
    pub fn from_matrix(r: &[Complex64], len: usize) -> Result<Self> {
        check_len("covariance", len * len, r.len())?;
        Ok(WienerEstimator {
            len,
            route: Route::Dense(r.iter().map(|&z| cast_c(z)).collect()),
        })
    }

    /// Reduced-rank covariance; the solve runs in the `rank`-dimensional
    /// eigenspace via the matrix inversion lemma. Needs `Lambda + sigma^2 > 0`.
    pub fn low_rank(cov: &CovarianceModel, rel_cutoff: f64) -> Self {
        Self::from_factor(&cov.low_rank(Some(rel_cutoff)))
    }

    pub fn from_factor(f: &LowRankFactor) -> Self {
        WienerEstimator {
            len: f.len,
            route: Route::LowRank {
                values: f.values.iter().map(|&v| T::lit(v)).collect(),
                rows: f.rows.iter().map(|&z| cast_c(z)).collect(),
                rank: f.rank,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of covariance eigenpairs retained (`len` for the dense route).
    pub fn rank(&self) -> usize {
        match &self.route {
            Route::Dense(_) => self.len,
            Route::LowRank { rank, .. } => *rank,
        }
    }

    pub fn estimate(&self, y: &[C<T>], d: &[C<T>], lambda: &[T], sigma2: T) -> Result<Vec<C<T>>> {
        let n = self.len;
        check_len("received grid", n, y.len())?;
        check_len("feedback diagonal", n, d.len())?;
        check_len("lambda diagonal", n, lambda.len())?;
        match &self.route {
            Route::Dense(r) => {
                let mut a = vec![C::new(T::zero(), T::zero()); n * n];
                for j in 0..n {
                    let dj = d[j].conj();
                    for i in j..n {
                        a[j * n + i] = d[i] * r[j * n + i] * dj;
                    }
                    a[j * n + j] = C::new(a[j * n + j].re + lambda[j] + sigma2, T::zero());
                }
                let mut x = y.to_vec();
                hpd_solve_in_place(&mut a, n, &mut x)?;
                let v: Vec<C<T>> = x.iter().zip(d).map(|(x, d)| d.conj() * x).collect();
                let mut g = vec![C::new(T::zero(), T::zero()); n];
                for (j, vj) in v.iter().enumerate() {
                    let col = &r[j * n..(j + 1) * n];
                    for (gi, rij) in g.iter_mut().zip(col) {
                        *gi = *gi + *rij * vj;
                    }
                }
                Ok(g)
            }
            Route::LowRank { values, rows, rank } => {
                let r = *rank;
                let mut gram = vec![C::new(T::zero(), T::zero()); r * r];
                let mut z = vec![C::new(T::zero(), T::zero()); r];
                for i in 0..n {
                    let q = lambda[i] + sigma2;
                    if !(q > T::zero()) {
                        return Err(Error::Estimation(
                            "reduced-rank solve needs positive noise-plus-uncertainty on every grid point".into(),
                        ));
                    }
                    let u = &rows[i * r..(i + 1) * r];
                    let w = d[i].norm_sqr() / q;
                    let t = d[i].conj() * y[i] / q;
                    for a in 0..r {
                        let ua = u[a].conj();
                        z[a] = z[a] + ua * t;
                        if w == T::zero() {
                            continue;
                        }
                        let wa = ua * w;
                        for b in 0..=a {
                            gram[b * r + a] = gram[b * r + a] + wa * u[b];
                        }
                    }
                }
                for (a, &l) in values.iter().enumerate() {
                    gram[a * r + a] = gram[a * r + a] + C::new(l.recip(), T::zero());
                }
                hpd_solve_in_place(&mut gram, r, &mut z)?;
                Ok((0..n)
                    .map(|i| {
                        rows[i * r..(i + 1) * r]
                            .iter()
                            .zip(&z)
                            .fold(C::new(T::zero(), T::zero()), |acc, (u, c)| acc + *u * c)
                    })
                    .collect())
            }
        }
    }

    /// Estimate from decoder feedback: builds `D~` and `Lambda` and solves.
    pub fn estimate_with_feedback(
        &self,
        y: &[C<T>],
        pattern: &PilotPattern<T>,
        basis: &PrecodingBasis<T>,
        soft: &SoftSymbolFrame<T>,
        sigma2: T,
    ) -> Result<Vec<C<T>>> {
        let d = build_feedback(pattern, basis, &soft.symbols)?;
        let lambda = build_lambda(pattern, soft.variance);
        self.estimate(y, &d, &lambda, sigma2)
    }
}

/// One-shot dense Wiener estimate.
pub fn wiener_estimate<T: Real>(
    y: &[C<T>],
    d: &[C<T>],
    lambda: &[T],
    cov: &CovarianceModel,
    sigma2: T,
) -> Result<Vec<C<T>>> {
    WienerEstimator::dense(cov).estimate(y, d, lambda, sigma2)
}
