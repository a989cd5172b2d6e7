//! Monte-Carlo link simulation: plans, per-point BER accumulation and
//! sweep output files.
//!
//! Per-frame randomness comes from `frame_rng(seed, point, frame)` where
//! `point` indexes the (channel, Eb/N0) pair only, so every basis and
//! estimation mode sees the same bits, channels and noise.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chanest::{EstimationMode, WienerEstimator};
use crate::channel::{
    add_noise, doppler_support, noise_variance, ChannelPreset, ChannelRealization, CovarianceModel, Pdp,
    ScatteringConfig, DEFAULT_PATHS,
};
use crate::error::{Error, Result};
use crate::fec::{map_qpsk, CodeConfig, ConvCode, Interleaver};
use crate::frame::{FrameConfig, PilotPattern, PILOT_SEED};
use crate::precoding::{BasisKind, PrecodingBasis};
use crate::receiver::{ChannelKnowledge, IterativeReceiver, Truth};
use crate::scalar::Real;
use crate::seed::frame_rng;

/// Smallest support used when designing DPS sequences.
pub const MIN_DESIGN_SUPPORT: f64 = 1e-4;

/// Channel description in a plan; later fields override earlier ones:
/// preset, then `velocity_kmh`, then explicit `nu_d` / `theta_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    pub label: Option<String>,
    pub preset: Option<ChannelPreset>,
    pub velocity_kmh: Option<f64>,
    pub nu_d: Option<f64>,
    pub theta_p: Option<f64>,
    pub pdp: Pdp,
    pub n_paths: Option<usize>,
}

impl ChannelSpec {
    pub fn preset(p: ChannelPreset) -> Self {
        ChannelSpec {
            preset: Some(p),
            ..Default::default()
        }
    }

    pub fn resolve(&self, frame: &FrameConfig) -> Result<ScatteringConfig> {
        let (mut nu_d, mut theta_p) = self.preset.map_or((None, None), |p| {
            let (a, b) = p.supports();
            (Some(a), Some(b))
        });
        if let Some(v) = self.velocity_kmh {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("velocity {v} km/h must be non-negative")));
            }
            nu_d = Some(doppler_support(v, frame.carrier_freq, frame.symbol_duration()));
        }
        nu_d = self.nu_d.or(nu_d);
        theta_p = self.theta_p.or(theta_p);
        let (Some(nu_d), Some(theta_p)) = (nu_d, theta_p) else {
            return Err(Error::Config(format!(
                "channel {:?} needs a preset or both a Doppler (velocity_kmh / nu_d) and theta_p",
                self.label
            )));
        };
        let cfg = ScatteringConfig {
            nu_d,
            theta_p,
            pdp: self.pdp,
            n_paths: self.n_paths.unwrap_or(DEFAULT_PATHS),
        };
        cfg.validate()?;
        cfg.check_cyclic_prefix(frame.n_subcarriers, frame.cp_length)?;
        Ok(cfg)
    }

    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if let Some(v) = self.velocity_kmh {
            return format!("v{v}");
        }
        if let Some(p) = self.preset {
            return p.name().to_string();
        }
        "custom".to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingRule {
    /// Bit errors (final iteration) needed before a point may stop.
    pub min_bit_errors: u64,
    /// Frame errors (final iteration) needed before a point may stop.
    pub min_frame_errors: u64,
    pub max_frames: u64,
    /// Frames decoded per parallel batch.
    pub batch_size: usize,
    /// Skip the remaining Eb/N0 points of a curve once a point is error-free
    /// in every iteration.
    pub skip_after_error_free: bool,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            min_bit_errors: 100,
            min_frame_errors: 0,
            max_frames: 2000,
            batch_size: 32,
            skip_after_error_free: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Relative eigenvalue cutoff for the reduced-rank Wiener filter.
    pub rank_cutoff: Option<f64>,
    /// Full-covariance Cholesky solve instead of the reduced-rank filter.
    pub dense: bool,
    /// Assumed supports; default to the generating channel's.
    pub assumed_nu_d: Option<f64>,
    pub assumed_theta_p: Option<f64>,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            rank_cutoff: Some(1e-4),
            dense: false,
            assumed_nu_d: None,
            assumed_theta_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    #[serde(default)]
    pub seed: u64,
    pub ebn0_db: Vec<f64>,
    pub bases: Vec<BasisKind>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default = "default_modes")]
    pub estimation: Vec<EstimationMode>,
    /// Overrides `frame.n_iterations` when set.
    #[serde(default)]
    pub n_iterations: Option<usize>,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default)]
    pub estimator: EstimatorSettings,
}

fn default_modes() -> Vec<EstimationMode> {
    vec![EstimationMode::PerfectCsi]
}

impl SimulationPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: SimulationPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: SimulationPlan = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.ebn0_db.is_empty() {
            return Err(Error::Config("ebn0_db must list at least one point".into()));
        }
        if self.ebn0_db.iter().any(|x| x.is_nan()) {
            return Err(Error::Config("ebn0_db contains NaN".into()));
        }
        if self.bases.is_empty() {
            return Err(Error::Config("at least one basis is required".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::Config("at least one channel is required".into()));
        }
        if self.estimation.is_empty() {
            return Err(Error::Config("at least one estimation mode is required".into()));
        }
        if self.n_iterations == Some(0) {
            return Err(Error::Config("n_iterations must be >= 1".into()));
        }
        let s = &self.stopping;
        if s.max_frames == 0 || s.batch_size == 0 {
            return Err(Error::Config("stopping rule needs max_frames >= 1 and batch_size >= 1".into()));
        }
        if let Some(c) = self.estimator.rank_cutoff {
            if !(0.0..1.0).contains(&c) {
                return Err(Error::Config(format!("rank_cutoff {c} outside [0, 1)")));
            }
        }
        for ch in &self.channels {
            ch.resolve(&self.frame)?;
        }
        self.code.code()?;
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.n_iterations.unwrap_or(self.frame.n_iterations)
    }

    /// SHA-256 of the canonical JSON form of the plan.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Sizes the global worker pool; must run before any parallel work.
pub fn init_workers(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Everything needed to simulate one (channel, basis, estimation) curve.
pub struct Link<T: Real> {
    pub scattering: ScatteringConfig,
    pub mode: EstimationMode,
    pub n_iterations: usize,
    frame: FrameConfig,
    basis: PrecodingBasis<T>,
    pattern: PilotPattern<T>,
    code: ConvCode,
    interleaver: Interleaver,
    estimator: Option<WienerEstimator<T>>,
    tx_window: Option<Vec<T>>,
    info_len: usize,
}

/// Per-frame outcome, one entry per receiver iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub bit_errors: Vec<usize>,
    pub channel_mse: Vec<Option<f64>>,
}

impl<T: Real> Link<T> {
    pub fn new(
        frame: &FrameConfig,
        code: &CodeConfig,
        scattering: ScatteringConfig,
        basis: BasisKind,
        mode: EstimationMode,
        estimator: &EstimatorSettings,
        n_iterations: usize,
    ) -> Result<Self> {
        frame.validate()?;
        scattering.validate()?;
        let pattern = PilotPattern::from_config(frame, PILOT_SEED)?;
        let (mt, nf) = (frame.n_data_symbols(), frame.n_subcarriers);
        let design = (
            scattering.nu_d.max(MIN_DESIGN_SUPPORT),
            scattering.theta_p.max(MIN_DESIGN_SUPPORT),
        );
        let basis = PrecodingBasis::from_kind(basis, mt, nf, design)?;
        let conv = code.code()?;
        let code_len = pattern.n_data() * frame.bits_per_symbol();
        let info_len = (code_len / conv.n_outputs())
            .checked_sub(conv.tail_len())
            .filter(|_| code_len.is_multiple_of(conv.n_outputs()))
            .ok_or_else(|| Error::Config("data grid too small for the code".into()))?;
        let interleaver = Interleaver::new(code_len, code.interleaver_seed);
        let estimator = match mode {
            EstimationMode::PerfectCsi => None,
            EstimationMode::PilotOnly | EstimationMode::Iterative => {
                let cov = CovarianceModel::flat(
                    estimator.assumed_nu_d.unwrap_or(scattering.nu_d),
                    estimator.assumed_theta_p.unwrap_or(scattering.theta_p),
                    frame.n_symbols,
                    frame.n_subcarriers,
                )?;
                Some(match estimator.rank_cutoff {
                    Some(c) if !estimator.dense => WienerEstimator::low_rank(&cov, c),
                    _ => WienerEstimator::dense(&cov),
                })
            }
        };
        Ok(Link {
            scattering,
            mode,
            n_iterations,
            frame: frame.clone(),
            basis,
            pattern,
            code: conv,
            interleaver,
            estimator,
            tx_window: frame.tx_window.as_ref().map(|w| w.iter().map(|&x| T::lit(x)).collect()),
            info_len,
        })
    }

    pub fn info_len(&self) -> usize {
        self.info_len
    }

    pub fn basis(&self) -> &PrecodingBasis<T> {
        &self.basis
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn noise_variance(&self, ebn0_db: f64) -> f64 {
        noise_variance(ebn0_db, self.frame.code_rate, self.frame.bits_per_symbol())
    }

    /// Transmits and decodes one frame with randomness drawn from `rng` in
    /// a fixed order: information bits, channel, noise.
    pub fn run_frame<R: Rng + ?Sized>(&self, ebn0_db: f64, rng: &mut R) -> Result<FrameOutcome> {
        let info: Vec<u8> = (0..self.info_len).map(|_| u8::from(rng.random::<bool>())).collect();
        let coded = self.code.encode(&info);
        let symbols = map_qpsk::<T>(&self.interleaver.interleave(&coded))?;
        let mut x = self.pattern.multiplex(&self.basis.apply(&symbols)?)?;
        let ch = ChannelRealization::<T>::draw(&self.scattering, self.frame.n_subcarriers, self.frame.n_symbols, rng)?;
        let mut g = ch.g.into_vec();
        if let Some(w) = &self.tx_window {
            for (g, &w) in g.iter_mut().zip(w) {
                *g = *g * w;
            }
        }
        for (x, g) in x.iter_mut().zip(&g) {
            *x = *x * g;
        }
        let sigma2 = self.noise_variance(ebn0_db);
        add_noise(&mut x, sigma2, rng);
        let y = x;

        let rx = IterativeReceiver {
            basis: &self.basis,
            pattern: &self.pattern,
            code: &self.code,
            interleaver: &self.interleaver,
            n_iterations: self.n_iterations,
        };
        let csi = match (&self.estimator, self.mode) {
            (Some(e), EstimationMode::PilotOnly) => ChannelKnowledge::PilotOnly(e),
            (Some(e), _) => ChannelKnowledge::Iterative(e),
            (None, _) => ChannelKnowledge::Perfect(&g),
        };
        let truth = Truth {
            info_bits: Some(&info),
            channel: Some(&g),
        };
        let det = rx.detect_frame(&y, T::lit(sigma2), csi, truth)?;
        Ok(FrameOutcome {
            bit_errors: det.iterations.iter().map(|r| r.bit_errors.unwrap_or(0)).collect(),
            channel_mse: det.iterations.iter().map(|r| r.channel_mse).collect(),
        })
    }
}

/// Accumulated counts for one iteration of one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorCounts {
    pub bit_errors: u64,
    pub frame_errors: u64,
    /// Sum of squared per-frame bit errors, for frame-clustered intervals.
    pub sum_sq: f64,
    pub channel_mse_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Errors,
    MaxFrames,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bits_per_frame: u64,
    pub per_iteration: Vec<ErrorCounts>,
    pub stop: StopReason,
}

impl PointResult {
    pub fn ber(&self, iteration: usize) -> f64 {
        let c = &self.per_iteration[iteration];
        c.bit_errors as f64 / (self.frames * self.bits_per_frame) as f64
    }

    /// 95% interval from the spread of per-frame error counts.
    pub fn confidence(&self, iteration: usize) -> (f64, f64) {
        let c = &self.per_iteration[iteration];
        let f = self.frames as f64;
        let nb = self.bits_per_frame as f64;
        let mean = c.bit_errors as f64 / f;
        let var = if self.frames > 1 {
            ((c.sum_sq - f * mean * mean) / (f - 1.0)).max(0.0)
        } else {
            0.0
        };
        let ber = mean / nb;
        let half = 1.96 * (var / f).sqrt() / nb;
        // never narrower than a single-error resolution when no errors were seen
        let half = if c.bit_errors == 0 { 3.0 / (f * nb) } else { half };
        ((ber - half).max(0.0), ber + half)
    }

    pub fn all_error_free(&self) -> bool {
        self.per_iteration.iter().all(|c| c.bit_errors == 0)
    }
}

/// Simulates one Eb/N0 point until the stopping rule fires. Frames are
/// processed in batches but accumulated strictly in frame order, so the
/// result does not depend on the batch size or the number of threads.
pub fn run_point<T: Real>(
    link: &Link<T>,
    ebn0_db: f64,
    stopping: &StoppingRule,
    seed: u64,
    point: u64,
) -> Result<PointResult> {
    let iters = link.n_iterations.max(1);
    let mut counts = vec![ErrorCounts::default(); iters];
    let mut frames = 0u64;
    let mut stop = StopReason::MaxFrames;
    'outer: while frames < stopping.max_frames {
        let batch = (stopping.batch_size as u64).min(stopping.max_frames - frames);
        let outcomes: Vec<Result<FrameOutcome>> = (frames..frames + batch)
            .into_par_iter()
            .map(|f| link.run_frame(ebn0_db, &mut frame_rng(seed, point, f)))
            .collect();
        for o in outcomes {
            let o = o?;
            frames += 1;
            for (c, (&e, mse)) in counts.iter_mut().zip(o.bit_errors.iter().zip(&o.channel_mse)) {
                c.bit_errors += e as u64;
                c.frame_errors += u64::from(e > 0);
                c.sum_sq += (e * e) as f64;
                c.channel_mse_sum += mse.unwrap_or(0.0);
            }
            let last = &counts[iters - 1];
            if last.bit_errors >= stopping.min_bit_errors && last.frame_errors >= stopping.min_frame_errors {
                stop = StopReason::Errors;
                break 'outer;
            }
        }
    }
    Ok(PointResult {
        ebn0_db,
        frames,
        bits_per_frame: link.info_len() as u64,
        per_iteration: counts,
        stop,
    })
}

/// One row of the result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub channel: String,
    pub nu_d: f64,
    pub theta_p: f64,
    pub basis: BasisKind,
    pub estimation: EstimationMode,
    pub ebn0_db: f64,
    pub iteration: usize,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    pub channel_mse: Option<f64>,
    pub stop: StopReason,
}

impl BerRecord {
    pub const CSV_HEADER: &'static str = "channel,nu_d,theta_p,basis,estimation,ebn0_db,iteration,frames,bits,bit_errors,frame_errors,ber,ber_ci_low,ber_ci_high,channel_mse,stop";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{}",
            self.channel,
            self.nu_d,
            self.theta_p,
            self.basis,
            self.estimation,
            self.ebn0_db,
            self.iteration,
            self.frames,
            self.bits,
            self.bit_errors,
            self.frame_errors,
            self.ber,
            self.ber_ci_low,
            self.ber_ci_high,
            self.channel_mse.map(|m| format!("{m:.6e}")).unwrap_or_default(),
            match self.stop {
                StopReason::Errors => "errors",
                StopReason::MaxFrames => "max-frames",
            }
        )
    }
}

fn records_for(
    point: &PointResult,
    channel: &str,
    scattering: &ScatteringConfig,
    basis: BasisKind,
    mode: EstimationMode,
) -> Vec<BerRecord> {
    (0..point.per_iteration.len())
        .map(|i| {
            let c = &point.per_iteration[i];
            let (lo, hi) = point.confidence(i);
            BerRecord {
                channel: channel.to_string(),
                nu_d: scattering.nu_d,
                theta_p: scattering.theta_p,
                basis,
                estimation: mode,
                ebn0_db: point.ebn0_db,
                iteration: i + 1,
                frames: point.frames,
                bits: point.frames * point.bits_per_frame,
                bit_errors: c.bit_errors,
                frame_errors: c.frame_errors,
                ber: point.ber(i),
                ber_ci_low: lo,
                ber_ci_high: hi,
                channel_mse: (mode != EstimationMode::PerfectCsi).then(|| c.channel_mse_sum / point.frames as f64),
                stop: point.stop,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTiming {
    pub channel: String,
    pub basis: BasisKind,
    pub estimation: EstimationMode,
    pub ebn0_db: f64,
    pub frames: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<BerRecord>,
    pub timings: Vec<PointTiming>,
}

/// Runs every (channel, basis, estimation, Eb/N0) combination in `plan`.
/// `progress` is called after each point.
pub fn run_sweep<T: Real>(plan: &SimulationPlan, mut progress: impl FnMut(&BerRecord)) -> Result<SweepOutput> {
    plan.validate()?;
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (ci, spec) in plan.channels.iter().enumerate() {
        let scattering = spec.resolve(&plan.frame)?;
        let name = spec.name();
        for &basis in &plan.bases {
            for &mode in &plan.estimation {
                let link = Link::<T>::new(
                    &plan.frame,
                    &plan.code,
                    scattering,
                    basis,
                    mode,
                    &plan.estimator,
                    plan.iterations(),
                )?;
                for (pi, &ebn0) in plan.ebn0_db.iter().enumerate() {
                    let start = Instant::now();
                    let point_id = (ci as u64) << 32 | pi as u64;
                    let res = run_point(&link, ebn0, &plan.stopping, plan.seed, point_id)?;
                    timings.push(PointTiming {
                        channel: name.clone(),
                        basis,
                        estimation: mode,
                        ebn0_db: ebn0,
                        frames: res.frames,
                        seconds: start.elapsed().as_secs_f64(),
                    });
                    let recs = records_for(&res, &name, &scattering, basis, mode);
                    if let Some(r) = recs.last() {
                        progress(r);
                    }
                    records.extend(recs);
                    if plan.stopping.skip_after_error_free && res.all_error_free() {
                        break;
                    }
                }
            }
        }
    }
    Ok(SweepOutput { records, timings })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_records: usize,
    pub plan: SimulationPlan,
    pub dependencies: BTreeMap<String, String>,
}

/// Writes `ber.csv`, `manifest.json` and `timing.json` into `dir`. The
/// first two depend only on the plan and seed; wall times go to the third.
pub fn write_sweep(dir: &Path, plan: &SimulationPlan, out: &SweepOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("ber.csv");
    let mut text = String::from(BerRecord::CSV_HEADER);
    text.push('\n');
    for r in &out.records {
        text += &r.csv_row();
        text.push('\n');
    }
    fs::write(&csv, text).map_err(|e| Error::io(&csv, e))?;

    let deps = [
        ("nalgebra", "0.35"),
        ("rustfft", "6.4"),
        ("rand_chacha", "0.9"),
        ("rayon", "1"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: plan.config_hash(),
        seed: plan.seed,
        n_records: out.records.len(),
        plan: plan.clone(),
        dependencies: deps,
    };
    let man = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&man, json).map_err(|e| Error::io(&man, e))?;

    let timing = dir.join("timing.json");
    let json = serde_json::to_string_pretty(&out.timings).expect("timings serialize");
    fs::write(&timing, json).map_err(|e| Error::io(&timing, e))?;
    Ok(vec![csv, man, timing])
}

/// Eb/N0 where a BER curve crosses `target`, by linear interpolation of
/// `log10 BER` between the bracketing points. A zero-error point below the
/// crossing is replaced by the single-error level `1 / bits`, which makes
/// the estimate conservative (biased high). Points must be sorted by Eb/N0.
pub fn ebn0_at_ber(curve: &[(f64, f64, u64)], target: f64) -> Option<f64> {
    let lg = |ber: f64, bits: u64| {
        if ber > 0.0 {
            ber.log10()
        } else {
            (1.0 / bits.max(1) as f64).log10()
        }
    };
    let t = target.log10();
    for w in curve.windows(2) {
        let (x0, b0, n0) = w[0];
        let (x1, b1, n1) = w[1];
        let (y0, y1) = (lg(b0, n0), lg(b1, n1));
        if y0 >= t && y1 < t {
            if b1 == 0.0 && y0 <= y1 {
                return None;
            }
            return Some(x0 + (t - y0) * (x1 - x0) / (y1 - y0));
        }
    }
    None
}

/// `(ebn0, ber, bits)` points of one curve from sweep records, sorted by Eb/N0.
pub fn curve(
    records: &[BerRecord],
    channel: &str,
    basis: BasisKind,
    mode: EstimationMode,
    iteration: usize,
) -> Vec<(f64, f64, u64)> {
    let mut pts: Vec<(f64, f64, u64)> = records
        .iter()
        .filter(|r| r.channel == channel && r.basis == basis && r.estimation == mode && r.iteration == iteration)
        .map(|r| (r.ebn0_db, r.ber, r.bits))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_frame() -> FrameConfig {
        FrameConfig {
            n_subcarriers: 8,
            n_symbols: 6,
            cp_length: 2,
            pilot_symbol_indices: vec![1, 4],
            ..FrameConfig::default()
        }
    }

    #[test]
    fn interpolates_crossing() {
        let c = [(0.0, 1e-2, 1000), (2.0, 1e-4, 100_000), (4.0, 1e-6, 10_000_000)];
        assert!((ebn0_at_ber(&c, 1e-3).unwrap() - 1.0).abs() < 1e-12);
        assert!((ebn0_at_ber(&c, 1e-4).unwrap() - 2.0).abs() < 1e-12);
        assert!(ebn0_at_ber(&c, 1e-1).is_none());
    }

    #[test]
    fn zero_point_uses_single_error_level() {
        let c = [(0.0, 1e-2, 100), (1.0, 0.0, 10_000)];
        assert!((ebn0_at_ber(&c, 1e-3).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plan_rejects_empty_lists() {
        let text = r#"
            ebn0_db = []
            bases = ["dsft"]
            [[channels]]
            preset = "doubly-selective"
        "#;
        assert!(SimulationPlan::from_toml_str(text).is_err());
        let text = r#"
            ebn0_db = [1.0]
            bases = []
            [[channels]]
            preset = "doubly-selective"
        "#;
        assert!(SimulationPlan::from_toml_str(text).is_err());
    }

    #[test]
    fn plan_parses_velocity_channel() {
        let text = r#"
            seed = 5
            ebn0_db = [4.0, 6.0]
            bases = ["none", "dsft", "2ddps"]
            estimation = ["perfect-csi", "iterative"]
            [[channels]]
            velocity_kmh = 200.0
            theta_p = 0.15
            pdp = { shape = "exponential", theta_rms = 0.0625 }
        "#;
        let plan = SimulationPlan::from_toml_str(text).unwrap();
        let s = plan.channels[0].resolve(&plan.frame).unwrap();
        assert!((s.nu_d - 0.00875).abs() < 2e-4);
        assert_eq!(plan.bases[2], BasisKind::Dps2d);
        assert_eq!(plan.channels[0].name(), "v200");
        assert_eq!(plan.iterations(), 3);
    }

    #[test]
    fn high_snr_flat_channel_is_error_free() {
        let frame = small_frame();
        let link = Link::<f64>::new(
            &frame,
            &CodeConfig::default(),
            ChannelPreset::NonSelective.scattering(),
            BasisKind::Dsft,
            EstimationMode::PerfectCsi,
            &EstimatorSettings::default(),
            2,
        )
        .unwrap();
        let res = run_point(&link, 60.0, &StoppingRule { max_frames: 20, ..Default::default() }, 1, 0).unwrap();
        assert_eq!(res.frames, 20);
        assert!(res.all_error_free());
    }

    #[test]
    fn point_is_independent_of_batch_size() {
        let frame = small_frame();
        let link = Link::<f64>::new(
            &frame,
            &CodeConfig::default(),
            ChannelPreset::DoublySelective.scattering(),
            BasisKind::Wht,
            EstimationMode::Iterative,
            &EstimatorSettings::default(),
            2,
        )
        .unwrap();
        let rule = |b| StoppingRule {
            min_bit_errors: 30,
            max_frames: 60,
            batch_size: b,
            ..Default::default()
        };
        let a = run_point(&link, 2.0, &rule(1), 9, 3).unwrap();
        let b = run_point(&link, 2.0, &rule(7), 9, 3).unwrap();
        assert_eq!(a, b);
    }
}
