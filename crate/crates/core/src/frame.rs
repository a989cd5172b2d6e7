//! Frame configuration, grid containers and pilot multiplexing.
//!
//! Grid convention used throughout the crate: frequency index `q` in
//! `0..N`, time index `m` in `0..M`, and vectorization by stacking columns,
//! so grid point `(q, m)` lives at vector index `m * N + q`.

use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{Real, C};

/// Default seed for the pilot value generator.
pub const PILOT_SEED: u64 = 0x005e_ed0f_9170;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
        }
    }
}

/// OFDM frame numerology and link parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    pub cp_length: usize,
    /// Hz
    pub bandwidth: f64,
    /// Hz
    pub carrier_freq: f64,
    /// Time indices of the dedicated pilot OFDM symbols. When empty, the
    /// evenly spread pattern with `n_pilot_symbols` entries is used.
    pub pilot_symbol_indices: Vec<usize>,
    pub n_pilot_symbols: usize,
    pub modulation: Modulation,
    pub code_rate: f64,
    pub n_iterations: usize,
    /// Real per-grid-point transmit gain in vec order; `None` is all-ones.
    pub tx_window: Option<Vec<f64>>,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            n_subcarriers: 64,
            n_symbols: 44,
            cp_length: 16,
            bandwidth: 10e6,
            carrier_freq: 5.9e9,
            pilot_symbol_indices: Vec::new(),
            n_pilot_symbols: 4,
            modulation: Modulation::Qpsk,
            code_rate: 0.5,
            n_iterations: 3,
            tx_window: None,
        }
    }
}

impl FrameConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: FrameConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: FrameConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_symbols == 0 {
            return Err(Error::Config("grid needs N, M >= 1".into()));
        }
        if !(self.bandwidth > 0.0) || !(self.carrier_freq > 0.0) {
            return Err(Error::Config("bandwidth and carrier_freq must be positive".into()));
        }
        if (self.code_rate - 0.5).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "only rate-1/2 coding is supported, got {}",
                self.code_rate
            )));
        }
        if self.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be >= 1".into()));
        }
        let times = self.pilot_times()?;
        if times.len() >= self.n_symbols {
            return Err(Error::Config("at least one data OFDM symbol is required".into()));
        }
        if let Some(w) = &self.tx_window {
            check_len("tx_window", self.grid_len(), w.len())?;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("tx_window entries must be finite".into()));
            }
        }
        Ok(())
    }

    /// Chip duration `1/B` in seconds.
    pub fn chip_duration(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// OFDM symbol duration including the cyclic prefix.
    pub fn symbol_duration(&self) -> f64 {
        self.chip_duration() * (self.n_subcarriers + self.cp_length) as f64
    }

    pub fn grid_len(&self) -> usize {
        self.n_subcarriers * self.n_symbols
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Sorted pilot symbol time indices.
    pub fn pilot_times(&self) -> Result<Vec<usize>> {
        if self.pilot_symbol_indices.is_empty() {
            return pilot_symbol_times(self.n_symbols, self.n_pilot_symbols);
        }
        let mut t = self.pilot_symbol_indices.clone();
        t.sort_unstable();
        t.dedup();
        if t.len() != self.pilot_symbol_indices.len() {
            return Err(Error::Config("duplicate pilot symbol index".into()));
        }
        if let Some(&last) = t.last() {
            if last >= self.n_symbols {
                return Err(Error::Config(format!(
                    "pilot symbol index {last} outside 0..{}",
                    self.n_symbols
                )));
            }
        }
        Ok(t)
    }

    /// `M'`: number of data OFDM symbols.
    pub fn n_data_symbols(&self) -> usize {
        self.n_symbols - self.pilot_times().map(|t| t.len()).unwrap_or(0)
    }

    /// `S_d = M' N'`.
    pub fn data_len(&self) -> usize {
        self.n_data_symbols() * self.n_subcarriers
    }

    /// Information bits per frame for a zero-tail rate-1/2 code with `tail` flush bits.
    pub fn info_bits(&self, tail: usize) -> usize {
        (self.data_len() * self.bits_per_symbol() / 2).saturating_sub(tail)
    }
}

/// Pilot OFDM symbol time indices `floor(i M/J + M/(2J))`, `i = 0..J`.
pub fn pilot_symbol_times(n_symbols: usize, n_pilots: usize) -> Result<Vec<usize>> {
    if n_pilots > n_symbols {
        return Err(Error::Config(format!(
            "{n_pilots} pilot symbols do not fit in {n_symbols} OFDM symbols"
        )));
    }
    if n_pilots == 0 {
        return Ok(Vec::new());
    }
    Ok((0..n_pilots)
        .map(|i| (2 * i * n_symbols + n_symbols) / (2 * n_pilots))
        .collect())
}

/// Dense `N x M` grid stored in vec order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame<E> {
    n_freq: usize,
    n_time: usize,
    values: Vec<E>,
}

impl<E: Clone> GridFrame<E> {
    pub fn filled(n_freq: usize, n_time: usize, value: E) -> Self {
        GridFrame {
            n_freq,
            n_time,
            values: vec![value; n_freq * n_time],
        }
    }

    pub fn from_fn(n_freq: usize, n_time: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut values = Vec::with_capacity(n_freq * n_time);
        for m in 0..n_time {
            for q in 0..n_freq {
                values.push(f(q, m));
            }
        }
        GridFrame {
            n_freq,
            n_time,
            values,
        }
    }

    /// Inverse of [`GridFrame::vec`].
    pub fn unvec(n_freq: usize, n_time: usize, values: Vec<E>) -> Result<Self> {
        check_len("unvec", n_freq * n_time, values.len())?;
        Ok(GridFrame {
            n_freq,
            n_time,
            values,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn get(&self, q: usize, m: usize) -> &E {
        &self.values[self.index(q, m)]
    }

    pub fn set(&mut self, q: usize, m: usize, value: E) {
        let k = self.index(q, m);
        self.values[k] = value;
    }

    #[inline]
    pub fn index(&self, q: usize, m: usize) -> usize {
        debug_assert!(q < self.n_freq && m < self.n_time);
        m * self.n_freq + q
    }

    /// Column-stacked view.
    pub fn vec(&self) -> &[E] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<E> {
        self.values
    }

    pub fn map<F, R>(&self, f: F) -> GridFrame<R>
    where
        F: FnMut(&E) -> R,
    {
        GridFrame {
            n_freq: self.n_freq,
            n_time: self.n_time,
            values: self.values.iter().map(f).collect(),
        }
    }
}

/// Placement of pilot and data symbols on the grid (the permutation
/// `[P_p P_d]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern<T> {
    n_freq: usize,
    n_time: usize,
    pilot_index: Vec<usize>,
    data_index: Vec<usize>,
    pilot_values: Vec<C<T>>,
}

impl<T: Real> PilotPattern<T> {
    /// Dedicated pilot OFDM symbols with seeded random QPSK pilot values.
    pub fn from_config(config: &FrameConfig, seed: u64) -> Result<Self> {
        let times = config.pilot_times()?;
        Self::pilot_symbols(config.n_subcarriers, config.n_symbols, &times, seed)
    }

    pub fn pilot_symbols(n_freq: usize, n_time: usize, times: &[usize], seed: u64) -> Result<Self> {
        if times.iter().any(|&m| m >= n_time) {
            return Err(Error::Config("pilot symbol index outside frame".into()));
        }
        let mut is_pilot = vec![false; n_freq * n_time];
        for &m in times {
            for q in 0..n_freq {
                is_pilot[m * n_freq + q] = true;
            }
        }
        Self::from_mask(n_freq, n_time, &is_pilot, seed)
    }

    /// Arbitrary pattern from a vec-ordered pilot mask.
    pub fn from_mask(n_freq: usize, n_time: usize, is_pilot: &[bool], seed: u64) -> Result<Self> {
        check_len("pilot mask", n_freq * n_time, is_pilot.len())?;
        let (pilot_index, data_index): (Vec<usize>, Vec<usize>) =
            (0..is_pilot.len()).partition(|&k| is_pilot[k]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = T::FRAC_1_SQRT_2();
        let pilot_values = pilot_index
            .iter()
            .map(|_| {
                let re = if rng.random::<bool>() { a } else { -a };
                let im = if rng.random::<bool>() { a } else { -a };
                Complex::new(re, im)
            })
            .collect();
        Ok(PilotPattern {
            n_freq,
            n_time,
            pilot_index,
            data_index,
            pilot_values,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn grid_len(&self) -> usize {
        self.n_freq * self.n_time
    }

    /// `S_p`
    pub fn n_pilots(&self) -> usize {
        self.pilot_index.len()
    }

    /// `S_d`
    pub fn n_data(&self) -> usize {
        self.data_index.len()
    }

    /// Vec indices of pilot positions, ascending.
    pub fn pilot_index(&self) -> &[usize] {
        &self.pilot_index
    }

    /// Vec indices of data positions, ascending.
    pub fn data_index(&self) -> &[usize] {
        &self.data_index
    }

    pub fn pilot_positions(&self) -> Vec<(usize, usize)> {
        self.pilot_index.iter().map(|&k| self.position(k)).collect()
    }

    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        self.data_index.iter().map(|&k| self.position(k)).collect()
    }

    fn position(&self, k: usize) -> (usize, usize) {
        (k % self.n_freq, k / self.n_freq)
    }

    pub fn pilot_values(&self) -> &[C<T>] {
        &self.pilot_values
    }

    /// `P_p p + P_d d`.
    pub fn scatter(&self, pilots: &[C<T>], data: &[C<T>]) -> Result<Vec<C<T>>> {
        check_len("pilot symbols", self.n_pilots(), pilots.len())?;
        check_len("data symbols", self.n_data(), data.len())?;
        let mut out = vec![C::new(T::zero(), T::zero()); self.grid_len()];
        for (&k, &v) in self.pilot_index.iter().zip(pilots) {
            out[k] = v;
        }
        for (&k, &v) in self.data_index.iter().zip(data) {
            out[k] = v;
        }
        Ok(out)
    }

    /// `P_d^T x`.
    pub fn gather_data<E: Copy>(&self, full: &[E]) -> Vec<E> {
        debug_assert_eq!(full.len(), self.grid_len());
        self.data_index.iter().map(|&k| full[k]).collect()
    }

    /// `P_p^T x`.
    pub fn gather_pilots<E: Copy>(&self, full: &[E]) -> Vec<E> {
        debug_assert_eq!(full.len(), self.grid_len());
        self.pilot_index.iter().map(|&k| full[k]).collect()
    }

    /// Transmit grid for precoded data `d`.
    pub fn multiplex(&self, data: &[C<T>]) -> Result<Vec<C<T>>> {
        self.scatter(&self.pilot_values, data)
    }
}
