//! Orthonormal 2D precoding bases and their fast transforms.
//!
//! A basis spreads the `S_d = M' N'` data symbols over the data grid,
//! `d = S b`. Columns of `S` are the vectorized sequences `s_{p,n}` in the
//! same column-stacked order as the data grid itself, so column
//! `n * N' + p` belongs to transform-domain index `(p, n)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{hermitian_eigen, kron};
use crate::scalar::{cast_c, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[serde(rename = "none")]
    Identity,
    Dsft,
    Wht,
    #[serde(alias = "2ddps")]
    Dps2d,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Identity => "none",
            BasisKind::Dsft => "dsft",
            BasisKind::Wht => "wht",
            BasisKind::Dps2d => "dps2d",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "identity" | "ofdm" => Ok(BasisKind::Identity),
            "dsft" => Ok(BasisKind::Dsft),
            "wht" => Ok(BasisKind::Wht),
            "dps2d" | "2ddps" => Ok(BasisKind::Dps2d),
            other => Err(Error::Config(format!("unknown basis kind {other:?}"))),
        }
    }
}

/// Discrete prolate spheroidal sequences for band `[nu1, nu2]` on `0..len`.
#[derive(Debug, Clone)]
pub struct DpsBasis {
    pub band: (f64, f64),
    pub len: usize,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    sequences: Vec<Complex64>,
}

impl DpsBasis {
    /// Sequence `u_i`, i.e. column `i` of the eigenvector matrix.
    pub fn sequence(&self, i: usize) -> &[Complex64] {
        &self.sequences[i * self.len..(i + 1) * self.len]
    }

    /// Column-major `len x len` matrix with the sequences as columns.
    pub fn matrix(&self) -> &[Complex64] {
        &self.sequences
    }
}

/// `C_k(W)`, the band-limiting kernel for `W = [nu1, nu2]`.
pub fn dps_kernel_coeff(k: i64, nu1: f64, nu2: f64) -> Complex64 {
    let width = nu2 - nu1;
    if k == 0 {
        return Complex64::new(width, 0.0);
    }
    let kf = k as f64;
    let x = std::f64::consts::PI * kf;
    let mag = (x * width).sin() / x;
    Complex64::from_polar(mag, x * (nu1 + nu2))
}

/// Column-major Hermitian Toeplitz kernel, entry `(m, l)` is `C_{l-m}`.
pub fn dps_kernel(nu1: f64, nu2: f64, len: usize) -> Vec<Complex64> {
    let mut a = Vec::with_capacity(len * len);
    for l in 0..len {
        for m in 0..len {
            a.push(dps_kernel_coeff(l as i64 - m as i64, nu1, nu2));
        }
    }
    a
}

pub fn dps_sequences(nu1: f64, nu2: f64, len: usize) -> Result<DpsBasis> {
    let width = nu2 - nu1;
    if !(width > 0.0) || width >= 1.0 || !nu1.is_finite() || !nu2.is_finite() {
        return Err(Error::Basis(format!("DPS band [{nu1}, {nu2}] must satisfy 0 < |W| < 1")));
    }
    if len == 0 {
        return Err(Error::Basis("DPS length must be >= 1".into()));
    }
    let eig = hermitian_eigen(&dps_kernel(nu1, nu2, len), len);
    Ok(DpsBasis {
        band: (nu1, nu2),
        len,
        eigenvalues: eig.values,
        sequences: eig.vectors,
    })
}

#[derive(Clone)]
struct DsftPlan<T: Real> {
    fwd_freq: Arc<dyn Fft<T>>,
    inv_freq: Arc<dyn Fft<T>>,
    fwd_time: Arc<dyn Fft<T>>,
    inv_time: Arc<dyn Fft<T>>,
}

#[derive(Clone)]
struct HadamardPlan<T> {
    /// Power-of-two Sylvester part.
    block: usize,
    /// Row-major `h x h` +-1 core, `None` for pure Sylvester.
    core: Option<(usize, Vec<T>)>,
}

#[derive(Clone)]
enum Operator<T: Real> {
    Identity,
    Dsft(DsftPlan<T>),
    Hadamard(HadamardPlan<T>),
    /// `S = U_t (x) U_f`, both column-major.
    Kron { time: Vec<C<T>>, freq: Vec<C<T>> },
}

/// An `S_d x S_d` unitary precoder with a fast apply/adjoint.
#[derive(Clone)]
pub struct PrecodingBasis<T: Real> {
    kind: BasisKind,
    n_time: usize,
    n_freq: usize,
    op: Operator<T>,
}

impl<T: Real> fmt::Debug for PrecodingBasis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrecodingBasis")
            .field("kind", &self.kind)
            .field("n_time", &self.n_time)
            .field("n_freq", &self.n_freq)
            .finish()
    }
}

fn check_dims(n_time: usize, n_freq: usize) -> Result<()> {
    if n_time == 0 || n_freq == 0 {
        return Err(Error::Basis("basis dimensions must be >= 1".into()));
    }
    Ok(())
}

impl<T: Real> PrecodingBasis<T> {
    /// No precoding, `S = I` (plain OFDM).
    pub fn identity(n_time: usize, n_freq: usize) -> Result<Self> {
        check_dims(n_time, n_freq)?;
        Ok(PrecodingBasis {
            kind: BasisKind::Identity,
            n_time,
            n_freq,
            op: Operator::Identity,
        })
    }

    /// DSFT sequences `exp(j2pi(mn/M' - qp/N')) / sqrt(M'N')`.
    pub fn dsft(n_time: usize, n_freq: usize) -> Result<Self> {
        check_dims(n_time, n_freq)?;
        let mut planner = FftPlanner::new();
        let plan = DsftPlan {
            fwd_freq: planner.plan_fft_forward(n_freq),
            inv_freq: planner.plan_fft_inverse(n_freq),
            fwd_time: planner.plan_fft_forward(n_time),
            inv_time: planner.plan_fft_inverse(n_time),
        };
        Ok(PrecodingBasis {
            kind: BasisKind::Dsft,
            n_time,
            n_freq,
            op: Operator::Dsft(plan),
        })
    }

    /// Sylvester Walsh-Hadamard basis of power-of-two `size` (single column of time).
    pub fn wht_sylvester(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::Basis(format!("WHT size {size} is not a power of two")));
        }
        Ok(PrecodingBasis {
            kind: BasisKind::Wht,
            n_time: 1,
            n_freq: size,
            op: Operator::Hadamard(HadamardPlan {
                block: size,
                core: None,
            }),
        })
    }

    /// Hadamard basis on an `n_time x n_freq` data grid.
    ///
    /// Power-of-two sizes give the Sylvester WHT. Other sizes `2^k (p+1)`
    /// with `p = 3 mod 4` prime use a Paley core, `H_{p+1} (x) H_{2^k}`,
    /// which keeps every sequence constant-modulus over the whole grid.
    pub fn wht(n_time: usize, n_freq: usize) -> Result<Self> {
        check_dims(n_time, n_freq)?;
        let size = n_time * n_freq;
        let (block, core) = hadamard_factorization(size)?;
        let core = core.map(|h| (h, paley_matrix::<T>(h)));
        Ok(PrecodingBasis {
            kind: BasisKind::Wht,
            n_time,
            n_freq,
            op: Operator::Hadamard(HadamardPlan { block, core }),
        })
    }

    /// Products of time DPS on `[-nu_d, nu_d]` and frequency DPS on `[0, theta_p]`.
    pub fn dps2d(n_time: usize, n_freq: usize, nu_d: f64, theta_p: f64) -> Result<Self> {
        check_dims(n_time, n_freq)?;
        let time = dps_sequences(-nu_d, nu_d, n_time)?;
        let freq = dps_sequences(0.0, theta_p, n_freq)?;
        Ok(PrecodingBasis {
            kind: BasisKind::Dps2d,
            n_time,
            n_freq,
            op: Operator::Kron {
                time: time.matrix().iter().map(|&z| cast_c(z)).collect(),
                freq: freq.matrix().iter().map(|&z| cast_c(z)).collect(),
            },
        })
    }

    /// Builds the basis named by `kind`; `supports` = `(nu_d, theta_p)` feeds DPS.
    pub fn from_kind(kind: BasisKind, n_time: usize, n_freq: usize, supports: (f64, f64)) -> Result<Self> {
        match kind {
            BasisKind::Identity => Self::identity(n_time, n_freq),
            BasisKind::Dsft => Self::dsft(n_time, n_freq),
            BasisKind::Wht => Self::wht(n_time, n_freq),
            BasisKind::Dps2d => Self::dps2d(n_time, n_freq, supports.0, supports.1),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// `M'`
    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// `N'`
    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn len(&self) -> usize {
        self.n_time * self.n_freq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_constant_modulus(&self) -> bool {
        match self.op {
            Operator::Dsft(_) | Operator::Hadamard(_) => true,
            Operator::Identity => self.len() == 1,
            Operator::Kron { .. } => false,
        }
    }

    /// `d = S b`.
    pub fn apply(&self, b: &[C<T>]) -> Result<Vec<C<T>>> {
        check_len("precoder input", self.len(), b.len())?;
        let mut x = b.to_vec();
        match &self.op {
            Operator::Identity => {}
            Operator::Dsft(plan) => {
                // rows: sum over n of exp(+j2pi mn/M'), then columns: sum over p of exp(-j2pi qp/N')
                self.fft_rows(&mut x, &plan.inv_time);
                self.fft_cols(&mut x, &plan.fwd_freq);
                self.scale(&mut x);
            }
            Operator::Hadamard(plan) => plan.apply(&mut x, false),
            Operator::Kron { time, freq } => return Ok(self.kron_apply(&x, time, freq, false)),
        }
        Ok(x)
    }

    /// `b = S^H d`.
    pub fn adjoint(&self, d: &[C<T>]) -> Result<Vec<C<T>>> {
        check_len("precoder adjoint input", self.len(), d.len())?;
        let mut x = d.to_vec();
        match &self.op {
            Operator::Identity => {}
            Operator::Dsft(plan) => {
                self.fft_cols(&mut x, &plan.inv_freq);
                self.fft_rows(&mut x, &plan.fwd_time);
                self.scale(&mut x);
            }
            Operator::Hadamard(plan) => plan.apply(&mut x, true),
            Operator::Kron { time, freq } => return Ok(self.kron_apply(&x, time, freq, true)),
        }
        Ok(x)
    }

    /// Effective channel coefficients `gamma_{p,n} = sum |s^{p,n}_{q,m}|^2 g2_{q,m}`
    /// for channel power `g2 = |g|^2` on the data grid.
    pub fn weighted_column_power(&self, g2: &[T]) -> Result<Vec<T>> {
        check_len("channel power", self.len(), g2.len())?;
        let (nf, nt) = (self.n_freq, self.n_time);
        Ok(match &self.op {
            Operator::Identity => g2.to_vec(),
            Operator::Dsft(_) | Operator::Hadamard(_) => {
                let mean = g2.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(g2.len());
                vec![mean; g2.len()]
            }
            Operator::Kron { time, freq } => {
                // Gamma = A_f^T G2 A_t with A = |U|^2
                let mut tmp = vec![T::zero(); nf * nt]; // A_f^T G2, N' x M'
                for m in 0..nt {
                    for p in 0..nf {
                        let mut s = T::zero();
                        for q in 0..nf {
                            s = s + freq[p * nf + q].norm_sqr() * g2[m * nf + q];
                        }
                        tmp[m * nf + p] = s;
                    }
                }
                let mut out = vec![T::zero(); nf * nt];
                for n in 0..nt {
                    for m in 0..nt {
                        let a = time[n * nt + m].norm_sqr();
                        if a == T::zero() {
                            continue;
                        }
                        for p in 0..nf {
                            out[n * nf + p] = out[n * nf + p] + tmp[m * nf + p] * a;
                        }
                    }
                }
                out
            }
        })
    }

    /// Explicit column-major `S`, built from the defining formulas rather
    /// than the fast transforms.
    pub fn dense(&self) -> Vec<C<T>> {
        let n = self.len();
        let (nf, nt) = (self.n_freq, self.n_time);
        match &self.op {
            Operator::Identity => {
                let mut s = vec![C::new(T::zero(), T::zero()); n * n];
                for k in 0..n {
                    s[k * n + k] = C::new(T::one(), T::zero());
                }
                s
            }
            Operator::Dsft(_) => {
                let scale = 1.0 / (n as f64).sqrt();
                let mut s = Vec::with_capacity(n * n);
                for col_n in 0..nt {
                    for p in 0..nf {
                        for m in 0..nt {
                            for q in 0..nf {
                                let phase = std::f64::consts::TAU
                                    * (((m * col_n) % nt) as f64 / nt as f64 - ((q * p) % nf) as f64 / nf as f64);
                                s.push(cast_c(Complex64::from_polar(scale, phase)));
                            }
                        }
                    }
                }
                s
            }
            Operator::Hadamard(plan) => {
                let syl = sylvester_dense(plan.block);
                let b = plan.block;
                let (h, core) = match &plan.core {
                    Some((h, core)) => (*h, core.clone()),
                    None => (1, vec![T::one()]),
                };
                let scale = T::one() / T::from_usize_lossy(n).sqrt();
                let mut s = vec![C::new(T::zero(), T::zero()); n * n];
                for ca in 0..h {
                    for cc in 0..b {
                        for ra in 0..h {
                            for rc in 0..b {
                                let v = core[ra * h + ca] * T::lit(syl[rc * b + cc] as f64) * scale;
                                s[(ca * b + cc) * n + ra * b + rc] = C::new(v, T::zero());
                            }
                        }
                    }
                }
                s
            }
            Operator::Kron { time, freq } => {
                let w = |v: &Vec<C<T>>| -> Vec<Complex64> {
                    v.iter().map(|z| Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())).collect()
                };
                kron(&w(time), nt, &w(freq), nf).into_iter().map(cast_c).collect()
            }
        }
    }

    fn scale(&self, x: &mut [C<T>]) {
        let s = T::one() / T::from_usize_lossy(self.len()).sqrt();
        for v in x.iter_mut() {
            *v = *v * s;
        }
    }

    fn fft_cols(&self, x: &mut [C<T>], fft: &Arc<dyn Fft<T>>) {
        if self.n_freq > 1 {
            fft.process(x);
        }
    }

    fn fft_rows(&self, x: &mut [C<T>], fft: &Arc<dyn Fft<T>>) {
        let (nf, nt) = (self.n_freq, self.n_time);
        if nt == 1 {
            return;
        }
        let mut buf = vec![C::new(T::zero(), T::zero()); nt];
        let mut scratch = vec![C::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for p in 0..nf {
            for (m, v) in buf.iter_mut().enumerate() {
                *v = x[m * nf + p];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (m, v) in buf.iter().enumerate() {
                x[m * nf + p] = *v;
            }
        }
    }

    fn kron_apply(&self, x: &[C<T>], time: &[C<T>], freq: &[C<T>], adjoint: bool) -> Vec<C<T>> {
        let (nf, nt) = (self.n_freq, self.n_time);
        let zero = C::new(T::zero(), T::zero());
        // forward: D = U_f B U_t^T ; adjoint: B = U_f^H D conj(U_t)
        let uf = |q: usize, p: usize| -> C<T> {
            if adjoint {
                freq[q * nf + p].conj()
            } else {
                freq[p * nf + q]
            }
        };
        let ut = |m: usize, n: usize| -> C<T> {
            if adjoint {
                time[m * nt + n].conj()
            } else {
                time[n * nt + m]
            }
        };
        let mut tmp = vec![zero; nf * nt];
        for n in 0..nt {
            for q in 0..nf {
                let mut s = zero;
                for p in 0..nf {
                    s = s + uf(q, p) * x[n * nf + p];
                }
                tmp[n * nf + q] = s;
            }
        }
        let mut out = vec![zero; nf * nt];
        for m in 0..nt {
            for n in 0..nt {
                let u = ut(m, n);
                for q in 0..nf {
                    out[m * nf + q] = out[m * nf + q] + tmp[n * nf + q] * u;
                }
            }
        }
        out
    }
}

impl<T: Real> HadamardPlan<T> {
    fn apply(&self, x: &mut [C<T>], adjoint: bool) {
        let b = self.block;
        for chunk in x.chunks_mut(b) {
            fwht_in_place(chunk);
        }
        if let Some((h, core)) = &self.core {
            let h = *h;
            let mut col = vec![C::new(T::zero(), T::zero()); h];
            for c in 0..b {
                for (a, v) in col.iter_mut().enumerate() {
                    *v = x[a * b + c];
                }
                for a in 0..h {
                    let mut s = C::new(T::zero(), T::zero());
                    for (a2, v) in col.iter().enumerate() {
                        let w = if adjoint { core[a2 * h + a] } else { core[a * h + a2] };
                        s = s + *v * w;
                    }
                    x[a * b + c] = s;
                }
            }
        }
        let s = T::one() / T::from_usize_lossy(x.len()).sqrt();
        for v in x.iter_mut() {
            *v = *v * s;
        }
    }
}

/// Unnormalized in-place fast Walsh-Hadamard transform (natural order).
pub fn fwht_in_place<T: Real>(x: &mut [C<T>]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (u, v) = (x[i], x[i + h]);
                x[i] = u + v;
                x[i + h] = u - v;
            }
        }
        h *= 2;
    }
}

/// Row-major +-1 Sylvester matrix of order `n`, by the block recursion.
pub fn sylvester_dense(n: usize) -> Vec<i8> {
    assert!(n.is_power_of_two());
    let mut h = vec![1i8];
    let mut r = 1;
    while r < n {
        let mut next = vec![0i8; 4 * r * r];
        for i in 0..r {
            for j in 0..r {
                let v = h[i * r + j];
                next[i * 2 * r + j] = v;
                next[i * 2 * r + j + r] = v;
                next[(i + r) * 2 * r + j] = v;
                next[(i + r) * 2 * r + j + r] = -v;
            }
        }
        h = next;
        r *= 2;
    }
    h
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Splits `size` into a power-of-two Sylvester block and an optional Paley order.
fn hadamard_factorization(size: usize) -> Result<(usize, Option<usize>)> {
    if size.is_power_of_two() {
        return Ok((size, None));
    }
    let mut block = 1usize << size.trailing_zeros();
    while block >= 1 {
        let h = size / block;
        if h.is_multiple_of(4) && is_prime(h - 1) && (h - 1) % 4 == 3 {
            return Ok((block, Some(h)));
        }
        if block == 1 {
            break;
        }
        block /= 2;
    }
    Err(Error::Basis(format!(
        "no Sylvester/Paley Hadamard matrix of order {size}"
    )))
}

/// Row-major Paley type-I Hadamard matrix of order `h = p + 1`, `p = 3 mod 4` prime.
pub fn paley_matrix<T: Real>(h: usize) -> Vec<T> {
    let p = h - 1;
    let mut chi = vec![-1i8; p];
    chi[0] = 0;
    for x in 1..p {
        chi[(x * x) % p] = 1;
    }
    let mut out = vec![T::zero(); h * h];
    for i in 0..h {
        for j in 0..h {
            let v: i8 = match (i, j) {
                (0, _) => 1,
                (_, 0) => -1,
                _ => {
                    let q = chi[(j + p - i) % p];
                    q + if i == j { 1 } else { 0 }
                }
            };
            out[i * h + j] = T::lit(v as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Cx = C<f64>;

    fn random_vec(n: usize, seed: u64) -> Vec<Cx> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Cx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn dense_mul(s: &[Cx], x: &[Cx], adjoint: bool) -> Vec<Cx> {
        let n = x.len();
        (0..n)
            .map(|i| {
                (0..n).fold(Cx::new(0.0, 0.0), |acc, j| {
                    acc + if adjoint { s[i * n + j].conj() * x[j] } else { s[j * n + i] * x[j] }
                })
            })
            .collect()
    }

    fn gram_error(s: &[Cx], n: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Cx::new(0.0, 0.0);
                for k in 0..n {
                    acc += s[i * n + k].conj() * s[j * n + k];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    fn max_rel(a: &[Cx], b: &[Cx]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn scalar_dsft_is_one() {
        let b = PrecodingBasis::<f64>::dsft(1, 1).unwrap();
        assert_eq!(b.dense(), vec![Cx::new(1.0, 0.0)]);
    }

    #[test]
    fn dsft_2x2_unitary_with_quarter_power() {
        let b = PrecodingBasis::<f64>::dsft(2, 2).unwrap();
        let s = b.dense();
        assert!(gram_error(&s, 4) < 1e-12);
        assert!(s.iter().all(|z| (z.norm_sqr() - 0.25).abs() < 1e-12));
    }

    #[test]
    fn dsft_unit_vector_gives_first_column() {
        let b = PrecodingBasis::<f64>::dsft(3, 5).unwrap();
        let mut e0 = vec![Cx::new(0.0, 0.0); 15];
        e0[0] = Cx::new(1.0, 0.0);
        let col = b.apply(&e0).unwrap();
        let s = b.dense();
        assert!(max_rel(&col, &s[..15]) < 1e-12);
    }

    #[test]
    fn dsft_fast_matches_dense() {
        for (m, n) in [(4, 4), (5, 3), (6, 8)] {
            let b = PrecodingBasis::<f64>::dsft(m, n).unwrap();
            let s = b.dense();
            let x = random_vec(m * n, 7);
            assert!(max_rel(&b.apply(&x).unwrap(), &dense_mul(&s, &x, false)) < 1e-10);
            assert!(max_rel(&b.adjoint(&x).unwrap(), &dense_mul(&s, &x, true)) < 1e-10);
            let back = b.adjoint(&b.apply(&x).unwrap()).unwrap();
            assert!(max_rel(&back, &x) < 1e-10);
        }
    }

    #[test]
    fn wht_base_case() {
        let b = PrecodingBasis::<f64>::wht_sylvester(2).unwrap();
        let s = b.dense();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [r, r, r, -r]; // symmetric, so column-major equals row-major
        for (z, e) in s.iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-15 && z.im == 0.0);
        }
    }

    #[test]
    fn wht4_rows_orthogonal() {
        let h = sylvester_dense(4);
        for i in 0..4 {
            for j in 0..4 {
                let dot: i32 = (0..4).map(|k| (h[i * 4 + k] * h[j * 4 + k]) as i32).sum();
                assert_eq!(dot, if i == j { 4 } else { 0 });
            }
        }
        let b = PrecodingBasis::<f64>::wht_sylvester(4).unwrap();
        assert!(b.dense().iter().all(|z| (z.re.abs() - 0.5).abs() < 1e-15));
    }

    #[test]
    fn wht_rejects_non_power_of_two() {
        assert!(PrecodingBasis::<f64>::wht_sylvester(12).is_err());
        assert!(PrecodingBasis::<f64>::wht_sylvester(0).is_err());
        // 2 * 3 = 6 has no Paley core
        assert!(PrecodingBasis::<f64>::wht(2, 3).is_err());
    }

    #[test]
    fn fast_wht_matches_dense() {
        let b = PrecodingBasis::<f64>::wht_sylvester(8).unwrap();
        let x = random_vec(8, 3);
        assert!(max_rel(&b.apply(&x).unwrap(), &dense_mul(&b.dense(), &x, false)) < 1e-10);
    }

    #[test]
    fn paley_matrices_are_hadamard() {
        for h in [4usize, 8, 12, 20, 24] {
            let p = paley_matrix::<f64>(h);
            for i in 0..h {
                for j in 0..h {
                    let dot: f64 = (0..h).map(|k| p[i * h + k] * p[j * h + k]).sum();
                    assert_eq!(dot, if i == j { h as f64 } else { 0.0 }, "order {h}");
                }
            }
        }
    }

    #[test]
    fn paley_wht_on_non_power_of_two_grid() {
        // 2 x 10 = 20 = 1 * 20 ; 4 x 10 = 40 = 2 * 20
        for (m, n) in [(2, 10), (4, 10)] {
            let b = PrecodingBasis::<f64>::wht(m, n).unwrap();
            let s = b.dense();
            let len = m * n;
            assert!(gram_error(&s, len) < 1e-12);
            assert!(s.iter().all(|z| (z.norm_sqr() - 1.0 / len as f64).abs() < 1e-12));
            let x = random_vec(len, 9);
            assert!(max_rel(&b.apply(&x).unwrap(), &dense_mul(&s, &x, false)) < 1e-10);
            assert!(max_rel(&b.adjoint(&x).unwrap(), &dense_mul(&s, &x, true)) < 1e-10);
        }
        assert_eq!(hadamard_factorization(2560).unwrap(), (128, Some(20)));
    }

    #[test]
    fn dps_single_sample() {
        let d = dps_sequences(0.0, 0.5, 1).unwrap();
        assert!((d.eigenvalues[0] - 0.5).abs() < 1e-15);
        assert!((d.sequence(0)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dps_trace_and_concentration() {
        let d = dps_sequences(-0.1, 0.1, 16).unwrap();
        let sum: f64 = d.eigenvalues.iter().sum();
        assert!((sum - 3.2).abs() < 1e-6);
        // 16 * 0.2 = 3.2 -> about 3 eigenvalues near one, then a steep drop
        assert!(d.eigenvalues[0] > 0.99 && d.eigenvalues[1] > 0.9);
        assert!(d.eigenvalues[6] < 1e-3);
        assert!(d.eigenvalues.iter().all(|&l| l > -1e-12 && l < 1.0));
    }

    #[test]
    fn dps_satisfies_kernel_equation() {
        let (nu1, nu2, len) = (0.0, 0.15, 12);
        let d = dps_sequences(nu1, nu2, len).unwrap();
        let k = dps_kernel(nu1, nu2, len);
        for i in 0..len {
            let u = d.sequence(i);
            for m in 0..len {
                let lhs: Complex64 = (0..len).map(|l| k[l * len + m] * u[l]).sum();
                assert!((lhs - d.eigenvalues[i] * u[m]).norm() < 1e-8);
            }
            let first = u.iter().find(|z| z.norm() > 1e-9).unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn dps_rejects_bad_bands() {
        assert!(dps_sequences(0.0, 0.0, 4).is_err());
        assert!(dps_sequences(-0.5, 0.5, 4).is_err());
        assert!(dps_sequences(0.0, 0.1, 0).is_err());
    }

    #[test]
    fn dps2d_orthonormal_and_fast_path() {
        let b = PrecodingBasis::<f64>::dps2d(4, 4, 0.009, 0.15).unwrap();
        let s = b.dense();
        assert!(gram_error(&s, 16) < 1e-10);
        let x = random_vec(16, 4);
        assert!(max_rel(&b.apply(&x).unwrap(), &dense_mul(&s, &x, false)) < 1e-10);
        assert!(max_rel(&b.adjoint(&x).unwrap(), &dense_mul(&s, &x, true)) < 1e-10);
        assert!(!b.is_constant_modulus());
        let one = PrecodingBasis::<f64>::dps2d(1, 1, 0.009, 0.15).unwrap();
        assert!((one.dense()[0] - Cx::new(1.0, 0.0)).norm() < 1e-12);
        assert!(PrecodingBasis::<f64>::dps2d(40, 64, 0.009, 0.15).is_ok());
    }

    #[test]
    fn weighted_power_matches_dense_sum() {
        let g2: Vec<f64> = (0..24).map(|k| 0.1 + (k as f64 * 0.37).sin().abs()).collect();
        for b in [
            PrecodingBasis::<f64>::identity(4, 6).unwrap(),
            PrecodingBasis::<f64>::dsft(4, 6).unwrap(),
            PrecodingBasis::<f64>::dps2d(4, 6, 0.05, 0.2).unwrap(),
            PrecodingBasis::<f64>::wht(2, 12).unwrap(),
        ] {
            let s = b.dense();
            let fast = b.weighted_column_power(&g2).unwrap();
            for k in 0..24 {
                let direct: f64 = (0..24).map(|r| s[k * 24 + r].norm_sqr() * g2[r]).sum();
                assert!((fast[k] - direct).abs() < 1e-12, "{:?}", b.kind());
            }
        }
    }

    #[test]
    fn precode_identity_and_energy() {
        let id = PrecodingBasis::<f64>::identity(3, 3).unwrap();
        let x = random_vec(9, 11);
        assert_eq!(id.apply(&x).unwrap(), x);
        let d = PrecodingBasis::<f64>::dsft(2, 2).unwrap();
        let ones = vec![Cx::new(1.0, 0.0); 4];
        assert!(max_rel(&d.apply(&ones).unwrap(), &dense_mul(&d.dense(), &ones, false)) < 1e-12);
        assert!(d.apply(&ones[..3]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [BasisKind::Identity, BasisKind::Dsft, BasisKind::Wht, BasisKind::Dps2d] {
            assert_eq!(k.name().parse::<BasisKind>().unwrap(), k);
        }
        assert!("qam".parse::<BasisKind>().is_err());
    }

    #[test]
    fn single_precision_dsft_round_trip() {
        let b = PrecodingBasis::<f32>::dsft(8, 8).unwrap();
        let x: Vec<C<f32>> = (0..64).map(|k| C::new((k as f32 * 0.3).sin(), (k as f32).cos())).collect();
        let back = b.adjoint(&b.apply(&x).unwrap()).unwrap();
        for (u, v) in back.iter().zip(&x) {
            assert!((u - v).norm() < 1e-5);
        }
    }
}
