//! Bit pipeline: convolutional code, interleaver, Gray QPSK and the BCJR
//! soft-in/soft-out decoder.
//!
//! LLR convention everywhere: `L = ln P(bit = 0) - ln P(bit = 1)`, so a
//! positive value favours bit 0.

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{Real, C};

/// LLR magnitude limit applied on decoder input and output.
pub const LLR_CLIP: f64 = 30.0;

pub const DEFAULT_INTERLEAVER_SEED: u64 = 0x1a7e_41ea;

#[inline]
pub fn clip_llr<T: Real>(l: T) -> T {
    let c = T::lit(LLR_CLIP);
    if l.is_nan() {
        T::zero()
    } else {
        l.max(-c).min(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeConfig {
    pub constraint_length: usize,
    /// Generator polynomials, most significant bit taps the current input.
    pub generators: Vec<u32>,
    pub interleaver_seed: u64,
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            constraint_length: 7,
            generators: vec![0o133, 0o171],
            interleaver_seed: DEFAULT_INTERLEAVER_SEED,
        }
    }
}

impl CodeConfig {
    pub fn code(&self) -> Result<ConvCode> {
        ConvCode::new(self.constraint_length, &self.generators)
    }
}

/// Feed-forward convolutional code of rate `1/generators.len()` with zero-tail termination.
#[derive(Debug, Clone)]
pub struct ConvCode {
    constraint_length: usize,
    generators: Vec<u32>,
    next: Vec<[u16; 2]>,
    /// Output label per (state, input); bit `j` is generator `j`'s output.
    label: Vec<[u8; 2]>,
}

impl ConvCode {
    pub fn new(constraint_length: usize, generators: &[u32]) -> Result<Self> {
        if !(2..=12).contains(&constraint_length) {
            return Err(Error::Config(format!(
                "constraint length {constraint_length} outside 2..=12"
            )));
        }
        if generators.len() != 2 {
            return Err(Error::Config("exactly two generators (rate 1/2) are supported".into()));
        }
        let reg_mask = (1u32 << constraint_length) - 1;
        if generators.iter().any(|&g| g == 0 || g & !reg_mask != 0) {
            return Err(Error::Config(format!(
                "generators {generators:?} do not fit constraint length {constraint_length}"
            )));
        }
        let n_states = 1usize << (constraint_length - 1);
        let mut next = Vec::with_capacity(n_states);
        let mut label = Vec::with_capacity(n_states);
        for s in 0..n_states as u32 {
            let mut nx = [0u16; 2];
            let mut lb = [0u8; 2];
            for u in 0..2u32 {
                let reg = (u << (constraint_length - 1)) | s;
                nx[u as usize] = (reg >> 1) as u16;
                lb[u as usize] = generators
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (j, &g)| acc | ((((reg & g).count_ones() & 1) as u8) << j));
            }
            next.push(nx);
            label.push(lb);
        }
        Ok(ConvCode {
            constraint_length,
            generators: generators.to_vec(),
            next,
            label,
        })
    }

    /// The (133, 171) octal, K = 7 code.
    pub fn standard() -> Self {
        ConvCode::new(7, &[0o133, 0o171]).expect("standard code")
    }

    pub fn constraint_length(&self) -> usize {
        self.constraint_length
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn n_outputs(&self) -> usize {
        self.generators.len()
    }

    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn tail_len(&self) -> usize {
        self.constraint_length - 1
    }

    /// Code bits produced for `info_len` information bits.
    pub fn code_len(&self, info_len: usize) -> usize {
        (info_len + self.tail_len()) * self.n_outputs()
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.code_len(info.len()));
        let mut s = 0usize;
        let tail = std::iter::repeat_n(0u8, self.tail_len());
        for u in info.iter().copied().chain(tail) {
            let u = (u & 1) as usize;
            let lb = self.label[s][u];
            for j in 0..self.n_outputs() {
                out.push((lb >> j) & 1);
            }
            s = self.next[s][u] as usize;
        }
        out
    }

    /// Encodes and checks the result has exactly `code_len` bits.
    pub fn encode_exact(&self, info: &[u8], code_len: usize) -> Result<Vec<u8>> {
        check_len("encoded frame", code_len, self.code_len(info.len()))?;
        Ok(self.encode(info))
    }
}

#[derive(Debug, Clone)]
pub struct BcjrOutput<T> {
    /// A-posteriori LLRs of all code bits.
    pub app: Vec<T>,
    /// A-posteriori LLRs of the information bits.
    pub info_llr: Vec<T>,
    /// Hard information decisions; `info_llr >= 0` decides bit 0.
    pub info_bits: Vec<u8>,
}

/// Forward-backward decoder on the zero-terminated trellis. Runs in the
/// probability domain with per-step normalization, which computes the exact
/// APPs with a handful of transcendental calls per trellis step.
pub fn bcjr_decode<T: Real>(code: &ConvCode, llr: &[T]) -> Result<BcjrOutput<T>> {
    let n_out = code.n_outputs();
    if !llr.len().is_multiple_of(n_out) || llr.len() / n_out < code.tail_len() {
        return Err(Error::Dimension {
            what: "BCJR input",
            expected: code.code_len(0),
            got: llr.len(),
        });
    }
    let steps = llr.len() / n_out;
    let info_len = steps - code.tail_len();
    let ns = code.n_states();
    let zero = T::zero();
    let half = T::lit(0.5);
    let n_labels = 1usize << n_out;

    // branch weight per step and output label, scaled so the largest is 1
    let mut gamma = vec![zero; steps * n_labels];
    let mut metric = vec![zero; n_labels];
    for t in 0..steps {
        for (lb, m) in metric.iter_mut().enumerate() {
            let mut g = zero;
            for j in 0..n_out {
                let l = clip_llr(llr[t * n_out + j]) * half;
                g = if (lb >> j) & 1 == 0 { g + l } else { g - l };
            }
            *m = g;
        }
        let top = metric.iter().copied().fold(T::neg_infinity(), T::max);
        for (slot, &m) in gamma[t * n_labels..(t + 1) * n_labels].iter_mut().zip(&metric) {
            *slot = (m - top).exp();
        }
    }
    let inputs = |t: usize| if t < info_len { 2 } else { 1 };
    let normalize = |v: &mut [T]| {
        let s = v.iter().fold(zero, |a, &b| a + b);
        if s > zero {
            let r = s.recip();
            v.iter_mut().for_each(|x| *x = *x * r);
        }
    };

    let mut alpha = vec![zero; (steps + 1) * ns];
    alpha[0] = T::one();
    for t in 0..steps {
        let (cur, nxt) = alpha.split_at_mut((t + 1) * ns);
        let cur = &cur[t * ns..];
        let nxt = &mut nxt[..ns];
        let g = &gamma[t * n_labels..(t + 1) * n_labels];
        for s in 0..ns {
            let a = cur[s];
            if a == zero {
                continue;
            }
            for u in 0..inputs(t) {
                let n = code.next[s][u] as usize;
                nxt[n] = nxt[n] + a * g[code.label[s][u] as usize];
            }
        }
        normalize(nxt);
    }

    let mut beta = vec![zero; (steps + 1) * ns];
    beta[steps * ns] = T::one();
    for t in (0..steps).rev() {
        let (cur, nxt) = beta.split_at_mut((t + 1) * ns);
        let cur = &mut cur[t * ns..];
        let nxt = &nxt[..ns];
        let g = &gamma[t * n_labels..(t + 1) * n_labels];
        for (s, slot) in cur.iter_mut().enumerate() {
            let mut acc = zero;
            for u in 0..inputs(t) {
                acc = acc + nxt[code.next[s][u] as usize] * g[code.label[s][u] as usize];
            }
            *slot = acc;
        }
        normalize(cur);
    }

    let ratio = |p0: T, p1: T| -> T {
        if p0 == zero && p1 == zero {
            zero
        } else {
            clip_llr(p0.ln() - p1.ln())
        }
    };
    let mut app = Vec::with_capacity(llr.len());
    let mut info_llr = Vec::with_capacity(info_len);
    let mut bit_acc = vec![[zero, zero]; n_out];
    for t in 0..steps {
        bit_acc.iter_mut().for_each(|a| *a = [zero, zero]);
        let mut info_acc = [zero, zero];
        let g = &gamma[t * n_labels..(t + 1) * n_labels];
        for s in 0..ns {
            let a = alpha[t * ns + s];
            if a == zero {
                continue;
            }
            for u in 0..inputs(t) {
                let b = beta[(t + 1) * ns + code.next[s][u] as usize];
                let lb = code.label[s][u] as usize;
                let m = a * g[lb] * b;
                info_acc[u] = info_acc[u] + m;
                for (j, acc) in bit_acc.iter_mut().enumerate() {
                    let c = (lb >> j) & 1;
                    acc[c] = acc[c] + m;
                }
            }
        }
        for acc in &bit_acc {
            app.push(ratio(acc[0], acc[1]));
        }
        if t < info_len {
            info_llr.push(ratio(info_acc[0], info_acc[1]));
        }
    }
    let info_bits = info_llr.iter().map(|&l| u8::from(l < T::zero())).collect();
    Ok(BcjrOutput {
        app,
        info_llr,
        info_bits,
    })
}

/// Seeded random permutation of code bits: `out[i] = in[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Interleaver { perm }
    }

    pub fn identity(len: usize) -> Self {
        Interleaver {
            perm: (0..len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn interleave<E: Copy>(&self, x: &[E]) -> Vec<E> {
        debug_assert_eq!(x.len(), self.perm.len());
        self.perm.iter().map(|&p| x[p]).collect()
    }

    pub fn deinterleave<E: Copy + Default>(&self, x: &[E]) -> Vec<E> {
        debug_assert_eq!(x.len(), self.perm.len());
        let mut out = vec![E::default(); x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }
}

/// Gray QPSK, bit pair `(b0, b1)` -> `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn map_qpsk<T: Real>(bits: &[u8]) -> Result<Vec<C<T>>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Dimension {
            what: "QPSK bit stream (even length)",
            expected: bits.len() + 1,
            got: bits.len(),
        });
    }
    let a = T::FRAC_1_SQRT_2();
    let level = |b: u8| if b & 1 == 0 { a } else { -a };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex::new(level(p[0]), level(p[1])))
        .collect())
}

pub fn demap_qpsk_hard<T: Real>(symbols: &[C<T>]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < T::zero()), u8::from(s.im < T::zero())])
        .collect()
}

/// Soft-symbol feedback and its pooled sample power.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSymbolFrame<T> {
    pub symbols: Vec<C<T>>,
    /// `(1/S_d) sum |b~|^2`
    pub variance: T,
}

impl<T: Real> SoftSymbolFrame<T> {
    pub fn zeros(len: usize) -> Self {
        SoftSymbolFrame {
            symbols: vec![C::new(T::zero(), T::zero()); len],
            variance: T::zero(),
        }
    }
}

/// Expected QPSK symbol under independent bit posteriors (LLRs in mapper order).
pub fn soft_symbols<T: Real>(llr: &[T]) -> Result<SoftSymbolFrame<T>> {
    if !llr.len().is_multiple_of(2) {
        return Err(Error::Dimension {
            what: "soft-symbol LLRs (even length)",
            expected: llr.len() + 1,
            got: llr.len(),
        });
    }
    let a = T::FRAC_1_SQRT_2();
    let half = T::lit(0.5);
    let symbols: Vec<C<T>> = llr
        .chunks_exact(2)
        .map(|p| Complex::new((p[0] * half).tanh() * a, (p[1] * half).tanh() * a))
        .collect();
    let variance = if symbols.is_empty() {
        T::zero()
    } else {
        symbols.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr()) / T::from_usize_lossy(symbols.len())
    };
    Ok(SoftSymbolFrame { symbols, variance })
}
