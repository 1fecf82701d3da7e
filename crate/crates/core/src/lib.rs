//! Delay-synchronous channel sounding from multi-chain OFDM CSI.
//!
//! One receive chain is connected to a reference antenna at a known
//! free-space distance from the transmitter. Its impulse response anchors
//! the delay axis and phase of every acquisition, which turns per-packet CSI
//! from a commodity receiver into a series of impulse responses on an
//! absolute, continuous delay axis.
//!
//! Modules, in processing order:
//!
//! - [`layout`], [`types`], [`phase`]: subcarrier grid, domain types and
//!   phase helpers
//! - [`preprocess`]: CSI sanitization
//! - [`sounding`]: windowed, oversampled IDFT
//! - [`calibrate`]: first-signal detection, delay calibration, phase
//!   normalization, π-shift tracking, moving average
//! - [`analysis`]: CDFs, noise floors, phase slopes, peak tracks
//! - [`pipeline`]: the composed stream processor
//! - [`capture`], [`export`]: file formats
//! - [`synth`]: synthetic captures with known ground truth

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calibrate;
pub mod capture;
pub mod error;
pub mod export;
pub mod layout;
pub mod phase;
pub mod pipeline;
pub mod preprocess;
pub mod sounding;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use layout::SubcarrierLayout;
pub use pipeline::{Pipeline, PipelineOptions, ResultBundle};
pub use sounding::{Sounder, WindowKind};
pub use types::{CalibrationParams, ChainRecord, CsiFrame, ImpulseResponse, SPEED_OF_LIGHT};
