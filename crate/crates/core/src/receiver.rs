//! Iterative OP receiver: LMMSE-windowed matched filter in the first
//! iteration, soft-symbol PIC with symbol-wise ML detection afterwards.

use crate::chanest::WienerEstimator;
use crate::error::{check_len, Result};
use crate::fec::{bcjr_decode, clip_llr, soft_symbols, ConvCode, Interleaver, SoftSymbolFrame};
use crate::frame::PilotPattern;
use crate::precoding::PrecodingBasis;
use crate::scalar::{Real, C};

/// `w = g^* / (|g|^2 + sigma^2)`; zero where both vanish.
pub fn lmmse_window<T: Real>(g: &[C<T>], sigma2: T) -> Vec<C<T>> {
    g.iter()
        .map(|g| {
            let den = g.norm_sqr() + sigma2;
            if den > T::zero() {
                g.conj() / den
            } else {
                C::new(T::zero(), T::zero())
            }
        })
        .collect()
}

/// `b^ = S^H diag(w) y` on the data grid.
pub fn matched_filter_stage<T: Real>(
    basis: &PrecodingBasis<T>,
    y_data: &[C<T>],
    window: &[C<T>],
) -> Result<Vec<C<T>>> {
    check_len("receive window", y_data.len(), window.len())?;
    let x: Vec<C<T>> = y_data.iter().zip(window).map(|(y, w)| y * w).collect();
    basis.adjoint(&x)
}

/// `L = 2 c^ / sigma^2` with `c^` the per-bit demapped value `sqrt(2) Re/Im b^`.
pub fn matched_filter_llrs<T: Real>(b_hat: &[C<T>], sigma2: T) -> Vec<T> {
    let s = T::SQRT_2() * T::lit(2.0) / sigma2;
    b_hat
        .iter()
        .flat_map(|b| [clip_llr(b.re * s), clip_llr(b.im * s)])
        .collect()
}

/// `gamma_{p,n} = sum |s^{p,n}_{q,m}|^2 |g_{q,m}|^2` over the data grid.
pub fn effective_gamma<T: Real>(basis: &PrecodingBasis<T>, g_data: &[C<T>]) -> Result<Vec<T>> {
    let g2: Vec<T> = g_data.iter().map(|g| g.norm_sqr()).collect();
    basis.weighted_column_power(&g2)
}

/// PIC statistics `a_{p,n} = s~^H (y - S~ b~ + s~ b~_{p,n})` in residual form:
/// `a = S^H (g^* . r) + gamma . b~` with `r = y - g . S b~`.
pub fn pic<T: Real>(
    basis: &PrecodingBasis<T>,
    y_data: &[C<T>],
    g_data: &[C<T>],
    soft: &[C<T>],
    gamma: &[T],
) -> Result<Vec<C<T>>> {
    check_len("channel on data grid", y_data.len(), g_data.len())?;
    check_len("effective channel", soft.len(), gamma.len())?;
    let d = basis.apply(soft)?;
    let r: Vec<C<T>> = y_data
        .iter()
        .zip(g_data)
        .zip(&d)
        .map(|((y, g), d)| g.conj() * (y - g * d))
        .collect();
    let mut a = basis.adjoint(&r)?;
    for ((a, b), &gm) in a.iter_mut().zip(soft).zip(gamma) {
        *a = *a + b * gm;
    }
    Ok(a)
}

/// Max-log bit LLRs for `a = gamma b + n~` with `n~` of variance `gamma sigma^2`,
/// by exhaustive search over the four QPSK points.
pub fn ml_detect<T: Real>(a: &[C<T>], gamma: &[T], sigma2: T) -> Vec<T> {
    let h = T::FRAC_1_SQRT_2();
    // index 2 b0 + b1
    let points = [C::new(h, h), C::new(h, -h), C::new(-h, h), C::new(-h, -h)];
    let mut out = Vec::with_capacity(2 * a.len());
    for (a, &gm) in a.iter().zip(gamma) {
        if !(gm > T::zero()) {
            out.extend([T::zero(), T::zero()]);
            continue;
        }
        let d: Vec<T> = points.iter().map(|x| (a - x * gm).norm_sqr()).collect();
        let scale = gm * sigma2;
        let l0 = (d[2].min(d[3]) - d[0].min(d[1])) / scale;
        let l1 = (d[1].min(d[3]) - d[0].min(d[2])) / scale;
        out.extend([clip_llr(l0), clip_llr(l1)]);
    }
    out
}

/// Where the receiver's channel knowledge comes from.
#[derive(Debug, Clone, Copy)]
pub enum ChannelKnowledge<'a, T> {
    /// True channel on the full grid.
    Perfect(&'a [C<T>]),
    /// Wiener estimate from pilots only, computed once.
    PilotOnly(&'a WienerEstimator<T>),
    /// Wiener estimate refined with decoder feedback every iteration.
    Iterative(&'a WienerEstimator<T>),
}

/// Ground truth for per-iteration diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Truth<'a, T> {
    pub info_bits: Option<&'a [u8]>,
    pub channel: Option<&'a [C<T>]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Pooled soft-symbol power fed into this iteration.
    pub soft_variance: f64,
    pub bit_errors: Option<usize>,
    /// Mean squared channel-estimation error over the grid.
    pub channel_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub info_bits: Vec<u8>,
    pub iterations: Vec<IterationReport>,
}

/// Static per-link receiver state shared by all frames.
#[derive(Debug, Clone, Copy)]
pub struct IterativeReceiver<'a, T: Real> {
    pub basis: &'a PrecodingBasis<T>,
    pub pattern: &'a PilotPattern<T>,
    pub code: &'a ConvCode,
    pub interleaver: &'a Interleaver,
    pub n_iterations: usize,
}

impl<'a, T: Real> IterativeReceiver<'a, T> {
    /// Runs the detection/decoding loop on one received grid `y` (vec order).
    pub fn detect_frame(
        &self,
        y: &[C<T>],
        sigma2: T,
        csi: ChannelKnowledge<'_, T>,
        truth: Truth<'_, T>,
    ) -> Result<Detection> {
        let pattern = self.pattern;
        check_len("received grid", pattern.grid_len(), y.len())?;
        check_len("precoder size", pattern.n_data(), self.basis.len())?;
        check_len("interleaver", 2 * pattern.n_data(), self.interleaver.len())?;
        let y_data = pattern.gather_data(y);
        let mut soft = SoftSymbolFrame::zeros(pattern.n_data());
        let mut g_hat: Option<Vec<C<T>>> = None;
        let mut reports = Vec::with_capacity(self.n_iterations);
        let mut info_bits = Vec::new();

        for it in 1..=self.n_iterations.max(1) {
            let g_full: Vec<C<T>> = match csi {
                ChannelKnowledge::Perfect(g) => {
                    check_len("channel grid", pattern.grid_len(), g.len())?;
                    g.to_vec()
                }
                ChannelKnowledge::PilotOnly(est) => match g_hat.take() {
                    Some(g) => g,
                    None => est.estimate_with_feedback(
                        y,
                        pattern,
                        self.basis,
                        &SoftSymbolFrame::zeros(pattern.n_data()),
                        sigma2,
                    )?,
                },
                ChannelKnowledge::Iterative(est) => {
                    est.estimate_with_feedback(y, pattern, self.basis, &soft, sigma2)?
                }
            };
            let g_data = pattern.gather_data(&g_full);

            let llr_mapped = if it == 1 {
                let w = lmmse_window(&g_data, sigma2);
                let b_hat = matched_filter_stage(self.basis, &y_data, &w)?;
                matched_filter_llrs(&b_hat, sigma2)
            } else {
                let gamma = effective_gamma(self.basis, &g_data)?;
                let a = pic(self.basis, &y_data, &g_data, &soft.symbols, &gamma)?;
                ml_detect(&a, &gamma, sigma2)
            };
            let decoded = bcjr_decode(self.code, &self.interleaver.deinterleave(&llr_mapped))?;

            let channel_mse = truth.channel.map(|g| {
                g.iter()
                    .zip(&g_full)
                    .map(|(a, b)| (a - b).norm_sqr().to_f64_lossy())
                    .sum::<f64>()
                    / g.len() as f64
            });
            let bit_errors = truth
                .info_bits
                .map(|t| t.iter().zip(&decoded.info_bits).filter(|(a, b)| a != b).count());
            reports.push(IterationReport {
                iteration: it,
                soft_variance: soft.variance.to_f64_lossy(),
                bit_errors,
                channel_mse,
            });

            soft = soft_symbols(&self.interleaver.interleave(&decoded.app))?;
            info_bits = decoded.info_bits;
            if matches!(csi, ChannelKnowledge::PilotOnly(_)) {
                g_hat = Some(g_full);
            }
        }
        Ok(Detection {
            info_bits,
            iterations: reports,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn window_examples() {
        assert_eq!(lmmse_window(&[c(1.0, 0.0)], 0.0), vec![c(1.0, 0.0)]);
        assert_eq!(lmmse_window(&[c(1.0, 0.0)], 1.0), vec![c(0.5, 0.0)]);
        assert_eq!(lmmse_window(&[c(2.0, 0.0)], 0.0), vec![c(0.5, 0.0)]);
        assert_eq!(lmmse_window(&[c(0.0, 0.0)], 0.0), vec![c(0.0, 0.0)]);
    }

    #[test]
    fn identity_basis_shrinkage() {
        let basis = PrecodingBasis::<f64>::identity(2, 2).unwrap();
        let y = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 1.0), c(3.0, 0.0)];
        let w = lmmse_window(&[c(1.0, 0.0); 4], 1.0);
        let b = matched_filter_stage(&basis, &y, &w).unwrap();
        for (b, y) in b.iter().zip(&y) {
            assert!((b - y / 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn ml_zero_input_and_erasure() {
        assert_eq!(ml_detect(&[c(0.0, 0.0)], &[1.0], 0.5), vec![0.0, 0.0]);
        assert_eq!(ml_detect(&[c(1.0, 1.0)], &[0.0], 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn ml_gray_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let g = rng.random::<f64>() * 2.0 + 0.05;
            let s2 = rng.random::<f64>() + 0.5;
            let l = ml_detect(&[a], &[g], s2);
            let k = 2.0 * std::f64::consts::SQRT_2 / s2;
            assert!((l[0] - clip_llr(k * a.re)).abs() < 1e-12);
            assert!((l[1] - clip_llr(k * a.im)).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_one_llr_scaling() {
        let l = matched_filter_llrs(&[c(std::f64::consts::FRAC_1_SQRT_2, -0.1)], 2.0);
        assert!((l[0] - 1.0).abs() < 1e-15);
        assert!((l[1] + 0.1 * std::f64::consts::SQRT_2).abs() < 1e-15);
    }
}
