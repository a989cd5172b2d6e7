//! Channel hardening of the effective channel coefficient.
//!
//! For constant-modulus precoders `gamma = (1/MN) sum lambda_i |z_i|^2` with
//! i.i.d. unit exponentials `|z_i|^2`, so everything follows from the
//! covariance spectrum.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelPreset, ChannelRealization, CovarianceModel, ScatteringConfig};
use crate::error::{Error, Result};
use crate::seed::frame_rng;

/// Eigenvalue cutoff used for spectrum reports.
pub const SPECTRUM_CUTOFF: f64 = 1e-4;

const DENSITY_POINTS: usize = 1 << 14;
/// Weights below this are folded into a deterministic shift.
const NEGLIGIBLE_WEIGHT: f64 = 1e-10;

/// `sigma_gamma^2 = sum lambda_i^2 / (MN)^2`.
pub fn gamma_variance(cov: &CovarianceModel) -> f64 {
    variance_from_eigenvalues(cov.eigenvalues(), cov.len())
}

pub fn variance_from_eigenvalues(eigenvalues: &[f64], len: usize) -> f64 {
    let n = len as f64;
    eigenvalues.iter().map(|l| l * l).sum::<f64>() / (n * n)
}

/// Law of a weighted sum of independent unit-mean exponentials.
#[derive(Debug, Clone)]
pub struct GammaDistribution {
    weights: Vec<f64>,
    mean: f64,
    variance: f64,
    dx: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl GammaDistribution {
    pub fn from_covariance(cov: &CovarianceModel) -> Self {
        let n = cov.len() as f64;
        Self::from_weights(cov.eigenvalues().iter().map(|l| l / n).collect())
    }

    /// Weights need not be sorted; negative rounding residue is clamped to zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        weights.iter_mut().for_each(|w| *w = w.max(0.0));
        weights.sort_by(|a, b| b.total_cmp(a));
        let mean = weights.iter().sum::<f64>();
        let variance = weights.iter().map(|w| w * w).sum::<f64>();
        let (dx, pdf) = tabulate(&weights);
        let mut cdf = Vec::with_capacity(pdf.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 1..pdf.len() {
            acc += 0.5 * (pdf[k - 1] + pdf[k]) * dx;
            cdf.push(acc);
        }
        GammaDistribution {
            weights,
            mean,
            variance,
            dx,
            pdf,
            cdf,
        }
    }

    /// Descending weights `lambda_i / MN`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn density(&self, x: f64) -> f64 {
        interpolate(&self.pdf, self.dx, x, 0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        interpolate(&self.cdf, self.dx, x, 1.0).min(1.0)
    }
}

fn interpolate(table: &[f64], dx: f64, x: f64, beyond: f64) -> f64 {
    if x < 0.0 || dx == 0.0 {
        return 0.0;
    }
    let t = x / dx;
    let k = t.floor() as usize;
    if k + 1 >= table.len() {
        return beyond;
    }
    let f = t - k as f64;
    table[k] * (1.0 - f) + table[k + 1] * f
}

/// Density on a uniform grid by successive exact convolutions of a
/// piecewise-linear density with each exponential.
fn tabulate(weights: &[f64]) -> (f64, Vec<f64>) {
    let big: Vec<f64> = weights.iter().copied().filter(|&w| w > NEGLIGIBLE_WEIGHT).collect();
    let Some(&w0) = big.first() else {
        return (0.0, vec![0.0; 2]);
    };
    let shift: f64 = weights.iter().filter(|&&w| w <= NEGLIGIBLE_WEIGHT).sum();
    let mean: f64 = big.iter().sum();
    let extent = mean + 40.0 * w0;
    let dx = extent / (DENSITY_POINTS - 1) as f64;
    let mut f: Vec<f64> = (0..DENSITY_POINTS)
        .map(|k| (-(k as f64) * dx / w0).exp() / w0)
        .collect();
    let mut h = vec![0.0; DENSITY_POINTS];
    for &w in &big[1..] {
        let a = (-dx / w).exp();
        let b = 1.0 - a;
        let c = (dx - w * b) / dx;
        h[0] = 0.0;
        for k in 0..DENSITY_POINTS - 1 {
            h[k + 1] = a * h[k] + f[k] * b + (f[k + 1] - f[k]) * c;
        }
        std::mem::swap(&mut f, &mut h);
    }
    if shift > 0.0 {
        // translate right by `shift`
        let s = shift / dx;
        let f0 = f.clone();
        for (k, v) in f.iter_mut().enumerate() {
            *v = interpolate(&f0, dx, (k as f64 - s) * dx, 0.0);
        }
    }
    (dx, f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SampleStats {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        SampleStats { n, mean, variance }
    }
}

/// Per-frame `gamma^CM` draws plus pooled per-grid-point `|g|^2` moments.
#[derive(Debug, Clone)]
pub struct GammaSamples {
    pub gamma: Vec<f64>,
    /// Variance of `|g_{q,m}|^2`, pooled over grid points and frames.
    pub point_power_variance: f64,
    pub point_power_mean: f64,
}

impl GammaSamples {
    pub fn stats(&self) -> SampleStats {
        SampleStats::of(&self.gamma)
    }
}

/// Draws `n_frames` channel realizations and records `gamma^CM = mean |g|^2`.
pub fn gamma_monte_carlo(
    cfg: &ScatteringConfig,
    n_time: usize,
    n_freq: usize,
    n_frames: usize,
    seed: u64,
) -> Result<GammaSamples> {
    if n_frames == 0 {
        return Err(Error::Config("gamma Monte-Carlo needs at least one frame".into()));
    }
    cfg.validate()?;
    let per_frame: Vec<(f64, f64)> = (0..n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = frame_rng(seed, 0, f as u64);
            let ch = ChannelRealization::<f64>::draw(cfg, n_freq, n_time, &mut rng).expect("validated config");
            let (s1, s2) = ch
                .g
                .vec()
                .iter()
                .fold((0.0, 0.0), |(a, b), g| (a + g.norm_sqr(), b + g.norm_sqr().powi(2)));
            (s1, s2)
        })
        .collect();
    let len = (n_time * n_freq) as f64;
    let total = len * n_frames as f64;
    let m1 = per_frame.iter().map(|p| p.0).sum::<f64>() / total;
    let m2 = per_frame.iter().map(|p| p.1).sum::<f64>() / total;
    Ok(GammaSamples {
        gamma: per_frame.iter().map(|p| p.0 / len).collect(),
        point_power_mean: m1,
        point_power_variance: m2 - m1 * m1,
    })
}

/// Two-sided Kolmogorov-Smirnov distance between samples and a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// All eigenvalues, descending.
    pub all: Vec<f64>,
    /// Eigenvalues above the cutoff.
    pub reported: Vec<f64>,
}

pub fn eigen_spectrum_report(cov: &CovarianceModel, cutoff: f64) -> SpectrumReport {
    let all = cov.eigenvalues().to_vec();
    let reported = all.iter().copied().filter(|&l| l > cutoff).collect();
    SpectrumReport { all, reported }
}

#[derive(Debug, Clone)]
pub struct HardeningRow {
    pub preset: ChannelPreset,
    pub nu_d: f64,
    pub theta_p: f64,
    pub variance_analytic: f64,
    pub variance_empirical: Option<f64>,
    pub spectrum: SpectrumReport,
}

/// Analytic (and optionally Monte-Carlo) hardening figures per preset.
pub fn hardening_table(
    presets: &[ChannelPreset],
    n_time: usize,
    n_freq: usize,
    mc_frames: Option<usize>,
    seed: u64,
) -> Result<Vec<HardeningRow>> {
    presets
        .iter()
        .enumerate()
        .map(|(i, &preset)| {
            let cfg = preset.scattering();
            let cov = CovarianceModel::for_scattering(&cfg, n_time, n_freq)?;
            let variance_empirical = match mc_frames {
                Some(n) => Some(gamma_monte_carlo(&cfg, n_time, n_freq, n, seed.wrapping_add(i as u64))?.stats().variance),
                None => None,
            };
            Ok(HardeningRow {
                preset,
                nu_d: cfg.nu_d,
                theta_p: cfg.theta_p,
                variance_analytic: gamma_variance(&cov),
                variance_empirical,
                spectrum: eigen_spectrum_report(&cov, SPECTRUM_CUTOFF),
            })
        })
        .collect()
}

/// Settings for the `hardening` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardeningPlan {
    pub presets: Vec<ChannelPreset>,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    /// Monte-Carlo frames per preset; 0 skips the empirical column.
    pub mc_frames: usize,
    pub seed: u64,
}

impl Default for HardeningPlan {
    fn default() -> Self {
        HardeningPlan {
            presets: ChannelPreset::ALL.to_vec(),
            n_symbols: 44,
            n_subcarriers: 64,
            mc_frames: 10_000,
            seed: 0,
        }
    }
}

impl HardeningPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: HardeningPlan = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if plan.presets.is_empty() || plan.n_symbols == 0 || plan.n_subcarriers == 0 {
            return Err(Error::Config("hardening plan needs presets and a non-empty grid".into()));
        }
        Ok(plan)
    }

    pub fn run(&self) -> Result<Vec<HardeningRow>> {
        let mc = (self.mc_frames > 0).then_some(self.mc_frames);
        hardening_table(&self.presets, self.n_symbols, self.n_subcarriers, mc, self.seed)
    }
}

/// Writes `table.csv` and one `spectrum_<preset>.csv` per row; returns the paths.
pub fn write_hardening_report(dir: &Path, rows: &[HardeningRow]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let table = dir.join("table.csv");
    let mut text = String::from("preset,nu_d,theta_p,variance_analytic,variance_empirical,eigenvalues_above_cutoff\n");
    for r in rows {
        let emp = r.variance_empirical.map(|v| format!("{v:.6}")).unwrap_or_default();
        text += &format!(
            "{},{},{},{:.6},{},{}\n",
            r.preset,
            r.nu_d,
            r.theta_p,
            r.variance_analytic,
            emp,
            r.spectrum.reported.len()
        );
    }
    fs::write(&table, text).map_err(|e| Error::io(&table, e))?;
    written.push(table);
    for r in rows {
        let path = dir.join(format!("spectrum_{}.csv", r.preset));
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut body = String::from("index,eigenvalue\n");
        for (i, l) in r.spectrum.reported.iter().enumerate() {
            body += &format!("{i},{l:.9e}\n");
        }
        f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_is_exponential() {
        let d = GammaDistribution::from_weights(vec![1.0]);
        for x in [0.0, 0.3, 1.0, 2.5, 7.0] {
            assert!((d.density(x) - (-x).exp()).abs() < 1e-5, "{x}");
            assert!((d.cdf(x) - (1.0 - (-x).exp())).abs() < 1e-5);
        }
    }

    #[test]
    fn equal_pair_is_erlang() {
        let d = GammaDistribution::from_weights(vec![0.5, 0.5]);
        for x in [0.1f64, 0.5, 1.0, 2.0, 4.0] {
            let e = 4.0 * x * (-2.0 * x).exp();
            assert!((d.density(x) - e).abs() < 1e-4, "{x}: {} vs {e}", d.density(x));
        }
    }

    #[test]
    fn distinct_pair_matches_partial_fractions() {
        let (a, b) = (0.7, 0.2);
        let d = GammaDistribution::from_weights(vec![b, a]);
        for x in [0.05, 0.4, 1.3, 3.0] {
            let e = ((-x / a).exp() - (-x / b).exp()) / (a - b);
            assert!((d.density(x) - e).abs() < 1e-4);
        }
    }

    #[test]
    fn many_weights_integrate_to_one_with_right_moments() {
        let w: Vec<f64> = (0..200).map(|i| (-(i as f64) / 20.0).exp()).collect();
        let s: f64 = w.iter().sum();
        let d = GammaDistribution::from_weights(w.iter().map(|x| x / s).collect());
        assert!((d.mean() - 1.0).abs() < 1e-12);
        let n = 20_000;
        let h = 20.0 / n as f64;
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let x = (k as f64 + 0.5) * h;
            let f = d.density(x);
            p0 += f * h;
            p1 += x * f * h;
            p2 += x * x * f * h;
        }
        assert!((p0 - 1.0).abs() < 1e-3, "{p0}");
        assert!((p1 - 1.0).abs() < 1e-3, "{p1}");
        assert!((p2 - p1 * p1 - d.variance()).abs() < 1e-3);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        let ks = ks_statistic(&x, |v| 1.0 - (-v).exp());
        assert!(ks <= 0.5 / n as f64 + 1e-12);
    }

    #[test]
    fn rank_one_spectrum() {
        let cov = CovarianceModel::flat(0.0, 0.0, 4, 8).unwrap();
        assert!((gamma_variance(&cov) - 1.0).abs() < 1e-12);
        let r = eigen_spectrum_report(&cov, SPECTRUM_CUTOFF);
        assert_eq!(r.reported.len(), 1);
        assert_eq!(r.all.len(), 32);
    }

    #[test]
    fn static_single_path_gamma_is_one() {
        let cfg = ScatteringConfig {
            n_paths: 1,
            ..ScatteringConfig::flat(0.0, 0.0)
        };
        let s = gamma_monte_carlo(&cfg, 3, 4, 20, 1).unwrap();
        assert!(s.gamma.iter().all(|g| (g - 1.0).abs() < 1e-12));
        assert!(s.stats().variance < 1e-20);
    }
}
