//! Geometry-based doubly-selective channel, AWGN, and the flat
//! delay-Doppler covariance model.

use std::fmt;
use std::str::FromStr;

use num_complex::{Complex, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GridFrame;
use crate::linalg::{hermitian_eigen, kron, HermitianEigen};
use crate::scalar::{Real, C};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default number of propagation paths per realization.
pub const DEFAULT_PATHS: usize = 60;

/// Power-delay profile over the normalized delay support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Pdp {
    #[default]
    Flat,
    /// Exponential decay with normalized RMS delay `theta_rms` (delay / (N T_C)).
    Exponential { theta_rms: f64 },
}

/// Normalized scattering supports and path sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    /// Doppler support, in units of the OFDM symbol rate.
    pub nu_d: f64,
    /// Delay support, in units of `N T_C`.
    pub theta_p: f64,
    pub pdp: Pdp,
    pub n_paths: usize,
}

impl ScatteringConfig {
    pub fn flat(nu_d: f64, theta_p: f64) -> Self {
        ScatteringConfig {
            nu_d,
            theta_p,
            pdp: Pdp::Flat,
            n_paths: DEFAULT_PATHS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.nu_d) {
            return Err(Error::Config(format!("nu_d = {} outside [0, 0.5)", self.nu_d)));
        }
        if !(0.0..1.0).contains(&self.theta_p) {
            return Err(Error::Config(format!("theta_p = {} outside [0, 1)", self.theta_p)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("at least one propagation path is required".into()));
        }
        if let Pdp::Exponential { theta_rms } = self.pdp {
            if !(theta_rms > 0.0) {
                return Err(Error::Config("exponential PDP needs theta_rms > 0".into()));
            }
        }
        Ok(())
    }

    /// Delay support must stay inside the cyclic prefix, `theta_p <= G/N`.
    pub fn check_cyclic_prefix(&self, n_subcarriers: usize, cp_length: usize) -> Result<()> {
        let limit = cp_length as f64 / n_subcarriers as f64;
        if self.theta_p > limit + 1e-12 {
            return Err(Error::Config(format!(
                "theta_p = {} exceeds cyclic prefix bound G/N = {limit}",
                self.theta_p
            )));
        }
        Ok(())
    }
}

/// The four reference channel types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelPreset {
    NonSelective,
    TimeSelective,
    FrequencySelective,
    DoublySelective,
}

impl ChannelPreset {
    pub const ALL: [ChannelPreset; 4] = [
        ChannelPreset::NonSelective,
        ChannelPreset::TimeSelective,
        ChannelPreset::FrequencySelective,
        ChannelPreset::DoublySelective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelPreset::NonSelective => "non-selective",
            ChannelPreset::TimeSelective => "time-selective",
            ChannelPreset::FrequencySelective => "frequency-selective",
            ChannelPreset::DoublySelective => "doubly-selective",
        }
    }

    /// `(nu_d, theta_p)`
    pub fn supports(self) -> (f64, f64) {
        match self {
            ChannelPreset::NonSelective => (0.0001, 0.0001),
            ChannelPreset::TimeSelective => (0.009, 0.0001),
            ChannelPreset::FrequencySelective => (0.0001, 0.15),
            ChannelPreset::DoublySelective => (0.009, 0.15),
        }
    }

    pub fn scattering(self) -> ScatteringConfig {
        let (nu_d, theta_p) = self.supports();
        ScatteringConfig::flat(nu_d, theta_p)
    }
}

impl fmt::Display for ChannelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown channel preset {s:?}")))
    }
}

/// Maximum Doppler shift in Hz for a relative speed in km/h.
pub fn max_doppler_hz(velocity_kmh: f64, carrier_freq: f64) -> f64 {
    velocity_kmh / 3.6 / SPEED_OF_LIGHT * carrier_freq
}

/// Normalized Doppler support `f_D T_S`.
pub fn doppler_support(velocity_kmh: f64, carrier_freq: f64, symbol_duration: f64) -> f64 {
    max_doppler_hz(velocity_kmh, carrier_freq) * symbol_duration
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path<T> {
    pub gain: C<T>,
    /// Normalized delay `theta`.
    pub delay: T,
    /// Normalized Doppler shift `nu`.
    pub doppler: T,
}

/// Samples propagation paths: uniform Doppler on `[-nu_d, nu_d]`, uniform
/// delay on `[0, theta_p]`, uniform phases, and PDP-shaped amplitudes
/// normalized to unit total power.
pub fn draw_paths<T: Real, R: Rng + ?Sized>(cfg: &ScatteringConfig, rng: &mut R) -> Result<Vec<Path<T>>> {
    cfg.validate()?;
    let mut raw: Vec<(f64, f64, f64, f64)> = (0..cfg.n_paths)
        .map(|_| {
            let doppler = if cfg.nu_d > 0.0 {
                rng.random_range(-cfg.nu_d..=cfg.nu_d)
            } else {
                0.0
            };
            let delay = if cfg.theta_p > 0.0 {
                rng.random_range(0.0..=cfg.theta_p)
            } else {
                0.0
            };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let power = match cfg.pdp {
                Pdp::Flat => 1.0,
                Pdp::Exponential { theta_rms } => (-delay / theta_rms).exp(),
            };
            (power, phase, delay, doppler)
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.0).sum();
    for r in raw.iter_mut() {
        r.0 /= total;
    }
    Ok(raw
        .into_iter()
        .map(|(power, phase, delay, doppler)| Path {
            gain: Complex::new(T::lit(power.sqrt() * phase.cos()), T::lit(power.sqrt() * phase.sin())),
            delay: T::lit(delay),
            doppler: T::lit(doppler),
        })
        .collect())
}

/// Time-variant frequency response `g_{q,m} = sum eta exp(-j2pi theta q) exp(j2pi nu m)`
/// with all-ones TX/RX filters.
pub fn realize<T: Real>(paths: &[Path<T>], n_freq: usize, n_time: usize) -> GridFrame<C<T>> {
    let zero = C::new(T::zero(), T::zero());
    let mut values = vec![zero; n_freq * n_time];
    let tau = T::TAU();
    let mut freq = vec![zero; n_freq];
    for p in paths {
        for (q, f) in freq.iter_mut().enumerate() {
            *f = C::from_polar(T::one(), -tau * p.delay * T::from_usize_lossy(q));
        }
        for m in 0..n_time {
            let t = p.gain * C::from_polar(T::one(), tau * p.doppler * T::from_usize_lossy(m));
            let col = &mut values[m * n_freq..(m + 1) * n_freq];
            for (v, f) in col.iter_mut().zip(&freq) {
                *v = *v + *f * t;
            }
        }
    }
    GridFrame::unvec(n_freq, n_time, values).expect("grid size")
}

/// One channel draw on the frame grid.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    pub g: GridFrame<C<T>>,
    pub paths: Vec<Path<T>>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn draw<R: Rng + ?Sized>(cfg: &ScatteringConfig, n_freq: usize, n_time: usize, rng: &mut R) -> Result<Self> {
        let paths = draw_paths(cfg, rng)?;
        let g = realize(&paths, n_freq, n_time);
        Ok(ChannelRealization { g, paths })
    }
}

/// `sigma_n^2 = 1 / (r alpha Eb/N0)` for unit-energy symbols; zero for infinite Eb/N0.
pub fn noise_variance(ebn0_db: f64, code_rate: f64, bits_per_symbol: usize) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    1.0 / (code_rate * bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Adds circularly-symmetric complex Gaussian noise of total variance `sigma2`.
pub fn add_noise<T: Real, R: Rng + ?Sized>(y: &mut [C<T>], sigma2: f64, rng: &mut R) {
    if sigma2 <= 0.0 {
        return;
    }
    let s = (sigma2 / 2.0).sqrt();
    for v in y.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = *v + C::new(T::lit(s * re), T::lit(s * im));
    }
}

/// Separable channel correlation `R_g = R_t (x) R_f` for a flat
/// delay-Doppler scattering function.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub nu_d: f64,
    pub theta_p: f64,
    n_time: usize,
    n_freq: usize,
    time: Vec<Complex64>,
    freq: Vec<Complex64>,
    time_eig: HermitianEigen,
    freq_eig: HermitianEigen,
    spectrum: Vec<f64>,
}

/// `[R_t]_{m,m'}` for lag `k = m - m'`.
pub fn time_correlation(nu_d: f64, k: i64) -> Complex64 {
    if k == 0 || nu_d == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = std::f64::consts::TAU * nu_d * k as f64;
    Complex64::new(x.sin() / x, 0.0)
}

/// `[R_f]_{q,q'}` for lag `k = q - q'`.
pub fn freq_correlation(theta_p: f64, k: i64) -> Complex64 {
    if k == 0 || theta_p == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = std::f64::consts::PI * theta_p * k as f64;
    Complex64::from_polar(x.sin() / x, -x)
}

fn toeplitz(len: usize, f: impl Fn(i64) -> Complex64) -> Vec<Complex64> {
    let mut a = Vec::with_capacity(len * len);
    for col in 0..len {
        for row in 0..len {
            a.push(f(row as i64 - col as i64));
        }
    }
    a
}

/// Reduced eigenbasis of `R_g`, vectors stored row-major (`len x rank`).
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub values: Vec<f64>,
    pub rows: Vec<Complex64>,
    pub len: usize,
    pub rank: usize,
}

impl CovarianceModel {
    pub fn flat(nu_d: f64, theta_p: f64, n_time: usize, n_freq: usize) -> Result<Self> {
        if !(0.0..0.5).contains(&nu_d) || !(0.0..1.0).contains(&theta_p) {
            return Err(Error::Config(format!("invalid supports nu_d={nu_d}, theta_p={theta_p}")));
        }
        if n_time == 0 || n_freq == 0 {
            return Err(Error::Config("covariance grid must be non-empty".into()));
        }
        let time = toeplitz(n_time, |k| time_correlation(nu_d, k));
        let freq = toeplitz(n_freq, |k| freq_correlation(theta_p, k));
        let time_eig = hermitian_eigen(&time, n_time);
        let freq_eig = hermitian_eigen(&freq, n_freq);
        let mut spectrum: Vec<f64> = time_eig
            .values
            .iter()
            .flat_map(|&a| freq_eig.values.iter().map(move |&b| (a * b).max(0.0)))
            .collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        // traces are exactly n_time and n_freq; clamp rounding so sum = MN
        let total: f64 = spectrum.iter().sum();
        let scale = (n_time * n_freq) as f64 / total;
        spectrum.iter_mut().for_each(|l| *l *= scale);
        Ok(CovarianceModel {
            nu_d,
            theta_p,
            n_time,
            n_freq,
            time,
            freq,
            time_eig,
            freq_eig,
            spectrum,
        })
    }

    pub fn for_scattering(cfg: &ScatteringConfig, n_time: usize, n_freq: usize) -> Result<Self> {
        Self::flat(cfg.nu_d, cfg.theta_p, n_time, n_freq)
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn len(&self) -> usize {
        self.n_time * self.n_freq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column-major `R_t`.
    pub fn time_factor(&self) -> &[Complex64] {
        &self.time
    }

    /// Column-major `R_f`.
    pub fn freq_factor(&self) -> &[Complex64] {
        &self.freq
    }

    /// Eigenvalues of `R_g`, descending, summing to `MN`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum
    }

    /// Explicit `MN x MN` covariance, column-major, vec order.
    pub fn dense(&self) -> Vec<Complex64> {
        kron(&self.time, self.n_time, &self.freq, self.n_freq)
    }

    /// Eigenpairs with `lambda > rel_cutoff * lambda_max`; all of them when `None`.
    pub fn low_rank(&self, rel_cutoff: Option<f64>) -> LowRankFactor {
        let top = self.time_eig.values[0].max(0.0) * self.freq_eig.values[0].max(0.0);
        let threshold = rel_cutoff.map_or(f64::NEG_INFINITY, |c| c * top);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, &a) in self.time_eig.values.iter().enumerate() {
            for (j, &b) in self.freq_eig.values.iter().enumerate() {
                let l = a.max(0.0) * b.max(0.0);
                if l > threshold {
                    pairs.push((l, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (nt, nf) = (self.n_time, self.n_freq);
        let len = nt * nf;
        let rank = pairs.len();
        let mut rows = vec![Complex64::new(0.0, 0.0); len * rank];
        for (c, &(_, i, j)) in pairs.iter().enumerate() {
            let ut = self.time_eig.vector(i);
            let uf = self.freq_eig.vector(j);
            for m in 0..nt {
                for q in 0..nf {
                    rows[(m * nf + q) * rank + c] = ut[m] * uf[q];
                }
            }
        }
        LowRankFactor {
            values: pairs.iter().map(|p| p.0).collect(),
            rows,
            len,
            rank,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_static_path_is_flat() {
        let cfg = ScatteringConfig {
            n_paths: 1,
            ..ScatteringConfig::flat(0.0, 0.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let paths = draw_paths::<f64, _>(&cfg, &mut rng).unwrap();
        assert_eq!(paths.len(), 1);
        assert!((paths[0].gain.norm() - 1.0).abs() < 1e-12);
        assert_eq!(paths[0].delay, 0.0);
        assert_eq!(paths[0].doppler, 0.0);
    }

    #[test]
    fn unit_path_gives_unit_response() {
        let p = [Path {
            gain: C::new(1.0, 0.0),
            delay: 0.0,
            doppler: 0.0,
        }];
        let g = realize(&p, 4, 3);
        assert!(g.vec().iter().all(|z| (z - C::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn pure_delay_is_phase_ramp() {
        let p = [Path {
            gain: C::new(1.0, 0.0),
            delay: 0.25,
            doppler: 0.0,
        }];
        let g = realize(&p, 8, 3);
        for m in 0..3 {
            for q in 0..8 {
                let expect = Complex64::from_polar(1.0, -std::f64::consts::TAU * 0.25 * q as f64);
                assert!((g.get(q, m) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_paths_match_pointwise_evaluation() {
        let p = [
            Path {
                gain: C::new(0.6, 0.2),
                delay: 0.07,
                doppler: 0.004,
            },
            Path {
                gain: C::new(-0.3, 0.5),
                delay: 0.13,
                doppler: -0.009,
            },
        ];
        let g = realize(&p, 16, 11);
        for m in 0..11 {
            for q in 0..16 {
                let direct: Complex64 = p
                    .iter()
                    .map(|l| {
                        let ph = std::f64::consts::TAU * (l.doppler * m as f64 - l.delay * q as f64);
                        l.gain * Complex64::new(ph.cos(), ph.sin())
                    })
                    .sum();
                assert!((g.get(q, m) - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn velocity_to_doppler() {
        let fd = max_doppler_hz(200.0, 5.9e9);
        assert!((fd - 1092.0).abs() < 2.0, "{fd}");
        let nu = doppler_support(200.0, 5.9e9, 8e-6);
        assert!((nu - 0.00874).abs() < 1e-4);
    }

    #[test]
    fn noise_variance_mapping() {
        assert_eq!(noise_variance(f64::INFINITY, 0.5, 2), 0.0);
        assert!((noise_variance(0.0, 0.5, 2) - 1.0).abs() < 1e-15);
        let mut y = vec![C::new(1.0f64, 0.0); 8];
        add_noise(&mut y, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(y.iter().all(|z| *z == C::new(1.0, 0.0)));
    }

    #[test]
    fn empirical_noise_variance() {
        let mut y = vec![C::new(0.0f64, 0.0); 100_000];
        add_noise(&mut y, 0.7, &mut ChaCha8Rng::seed_from_u64(3));
        let v: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((v / 0.7 - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn flat_limit_is_all_ones() {
        let c = CovarianceModel::flat(0.0, 0.0, 3, 4).unwrap();
        assert!(c.dense().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!((c.eigenvalues()[0] - 12.0).abs() < 1e-9);
        assert!(c.eigenvalues()[1..].iter().all(|&l| l.abs() < 1e-9));
    }

    #[test]
    fn unit_diagonal_and_trace() {
        let c = CovarianceModel::flat(0.009, 0.15, 6, 5).unwrap();
        let r = c.dense();
        for k in 0..30 {
            assert!((r[k * 30 + k] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        assert!((c.eigenvalues().iter().sum::<f64>() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn kronecker_spectrum_matches_dense_eigensolve() {
        let c = CovarianceModel::flat(0.05, 0.3, 8, 8).unwrap();
        let dense = hermitian_eigen(&c.dense(), 64);
        for (a, b) in c.eigenvalues().iter().zip(&dense.values) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn low_rank_reconstructs_full_covariance() {
        let c = CovarianceModel::flat(0.05, 0.3, 4, 5).unwrap();
        let f = c.low_rank(None);
        assert_eq!(f.rank, 20);
        let r = c.dense();
        for i in 0..20 {
            for j in 0..20 {
                let s: Complex64 = (0..f.rank)
                    .map(|k| f.rows[i * f.rank + k] * f.values[k] * f.rows[j * f.rank + k].conj())
                    .sum();
                assert!((s - r[j * 20 + i]).norm() < 1e-10);
            }
        }
        assert!(c.low_rank(Some(1e-4)).rank < 20);
    }

    #[test]
    fn preset_names() {
        for p in ChannelPreset::ALL {
            assert_eq!(p.name().parse::<ChannelPreset>().unwrap(), p);
        }
        assert_eq!(ChannelPreset::DoublySelective.supports(), (0.009, 0.15));
    }

    #[test]
    fn rejects_invalid_scattering() {
        assert!(ScatteringConfig::flat(0.6, 0.1).validate().is_err());
        assert!(ScatteringConfig::flat(0.01, -0.1).validate().is_err());
        let mut c = ScatteringConfig::flat(0.01, 0.1);
        c.n_paths = 0;
        assert!(c.validate().is_err());
        assert!(ScatteringConfig::flat(0.01, 0.3).check_cyclic_prefix(64, 16).is_err());
        assert!(ScatteringConfig::flat(0.01, 0.15).check_cyclic_prefix(64, 16).is_ok());
    }
}
