//! Orthogonal precoding over OFDM in doubly-selective channels: precoders,
//! an iterative PIC receiver with BCJR decoding and Wiener channel
//! estimation, channel-hardening analysis and a Monte-Carlo link simulator.
//!
//! The signal path is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `*32` variants for single precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanest;
pub mod channel;
pub mod error;
pub mod fec;
pub mod frame;
pub mod hardening;
mod linalg;
pub mod precoding;
pub mod receiver;
pub mod scalar;
pub mod seed;
pub mod selftest;
pub mod sim;

pub use chanest::{EstimationMode, WienerEstimator};
pub use channel::{ChannelPreset, CovarianceModel, Pdp, ScatteringConfig};
pub use error::{Error, Result};
pub use fec::{CodeConfig, ConvCode, Interleaver};
pub use frame::{FrameConfig, GridFrame, PilotPattern};
pub use hardening::{GammaDistribution, HardeningPlan};
pub use precoding::{BasisKind, PrecodingBasis};
pub use scalar::Real;
pub use sim::{init_workers, BerRecord, SimulationPlan};

pub type Complex = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
pub type Basis = PrecodingBasis<f64>;
pub type Basis32 = PrecodingBasis<f32>;
pub type Pilots = PilotPattern<f64>;
pub type Pilots32 = PilotPattern<f32>;
pub type Estimator = WienerEstimator<f64>;
pub type Estimator32 = WienerEstimator<f32>;
pub type Link = sim::Link<f64>;
pub type Link32 = sim::Link<f32>;
