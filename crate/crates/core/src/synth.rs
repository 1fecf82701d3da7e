//! Synthetic CSI captures from tapped-delay-line channels.
//!
//! Every frame carries a common symbol-timing offset and global phase on all
//! chains, as a single receiver with one sampling clock would. Chain 0 is the
//! reference and chain 1 the target. Each chain is normalized to unit mean
//! power (receiver AGC) and its absolute power is reported in `rss_dbm`.
//! Frames are generated independently from `(config, index, seed)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;
use crate::types::{CalibrationParams, ChainRecord, CsiFrame, SPEED_OF_LIGHT};

/// Cyclic prefix of the 802.11ax symbols the offsets are drawn within.
pub const CYCLIC_PREFIX_S: f64 = 3.2e-6;

/// Worst-case random backoff with CWmin = 15 and 9 µs slots.
pub const MAX_BACKOFF_JITTER_S: f64 = 135e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub gain: Complex64,
}

impl Tap {
    pub fn new(delay_s: f64, gain: Complex64) -> Self {
        Tap { delay_s, gain }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TapSet {
    pub taps: Vec<Tap>,
}

impl TapSet {
    pub fn new(taps: Vec<Tap>) -> Self {
        TapSet { taps }
    }

    pub fn validate(&self, layout: &SubcarrierLayout) -> Result<()> {
        let span = layout.delay_span_s();
        for t in &self.taps {
            if !(t.delay_s.is_finite() && t.delay_s >= 0.0 && t.delay_s < span) {
                return Err(Error::InvalidConfig(format!(
                    "tap delay {} s outside [0, {span})",
                    t.delay_s
                )));
            }
            if !(t.gain.re.is_finite() && t.gain.im.is_finite()) {
                return Err(Error::InvalidConfig("non-finite tap gain".into()));
            }
        }
        if !self.taps.windows(2).all(|w| w[0].delay_s < w[1].delay_s) {
            return Err(Error::InvalidConfig("tap delays must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Frequency response `Σ a·exp(−j2π kΔf (τ + extra_delay))` on the grid,
    /// with per-tap delay overrides.
    fn response(&self, layout: &SubcarrierLayout, delays: &[f64], extra_delay: f64) -> Vec<Complex64> {
        let mut h = vec![Complex64::new(0.0, 0.0); layout.count];
        for (tap, &delay) in self.taps.iter().zip(delays) {
            let tau = delay + extra_delay;
            for (slot, k) in h.iter_mut().zip(layout.indices()) {
                let phi = -2.0 * PI * layout.frequency_offset_hz(k) * tau;
                *slot += tap.gain * Complex64::from_polar(1.0, phi);
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultInjection {
    /// Per-frame probability that the two chains are reported swapped.
    pub swap_prob: f64,
    /// Per-frame probability that the target CSI is negated.
    pub pi_shift_prob: f64,
}

/// Receiver front-end artefacts applied identically to both chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceImpairments {
    /// Zero the unobserved DC subcarriers.
    pub blank_dc: bool,
    /// Attenuation of the notch subcarriers, dB.
    pub notch_attenuation_db: f64,
    /// Power roll-off at the band edges, dB, quadratic in subcarrier index.
    pub edge_rolloff_db: f64,
}

impl Default for DeviceImpairments {
    fn default() -> Self {
        DeviceImpairments {
            blank_dc: true,
            notch_attenuation_db: 0.0,
            edge_rolloff_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub layout: SubcarrierLayout,
    #[serde(default)]
    pub params: CalibrationParams,
    pub ref_taps: TapSet,
    pub target_taps: TapSet,
    /// Rate of change of each target path length, m/s. Empty means static.
    #[serde(default)]
    pub target_drift_mps: Vec<f64>,
    /// Uniform range of the per-frame symbol-timing offset.
    pub timing_offset_range_s: (f64, f64),
    /// Draw a uniform global phase per frame.
    #[serde(default = "yes")]
    pub random_global_phase: bool,
    /// Per-subcarrier SNR against the reference chain; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub frame_count: usize,
    pub frame_interval_s: f64,
    /// Upper bound of the uniform transmit-time jitter.
    #[serde(default)]
    pub backoff_jitter_s: f64,
    #[serde(default)]
    pub faults: FaultInjection,
    #[serde(default)]
    pub impairments: DeviceImpairments,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
}

fn yes() -> bool {
    true
}

fn default_tx_power() -> f64 {
    20.0
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        self.layout.validate()?;
        self.params.validate()?;
        self.ref_taps.validate(&self.layout)?;
        self.target_taps.validate(&self.layout)?;
        if self.ref_taps.taps.is_empty() || self.target_taps.taps.is_empty() {
            return bad("reference and target need at least one tap");
        }
        if !self.target_drift_mps.is_empty() && self.target_drift_mps.len() != self.target_taps.taps.len() {
            return bad("target_drift_mps must be empty or match the target taps");
        }
        let (lo, hi) = self.timing_offset_range_s;
        if !(lo >= 0.0 && lo <= hi && hi <= CYCLIC_PREFIX_S) {
            return bad("timing offset range must lie within [0, cyclic prefix]");
        }
        if self.frame_count == 0 {
            return bad("frame_count must be positive");
        }
        if !(self.frame_interval_s > 0.0) {
            return bad("frame_interval_s must be positive");
        }
        if !(self.backoff_jitter_s >= 0.0 && self.backoff_jitter_s < self.frame_interval_s) {
            return bad("backoff jitter must be non-negative and below the frame interval");
        }
        for p in [self.faults.swap_prob, self.faults.pi_shift_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("fault probabilities must be in [0, 1]");
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad("snr_db must be finite");
            }
        }
        let duration = self.frame_count as f64 * self.frame_interval_s + self.backoff_jitter_s;
        let span = self.layout.delay_span_s();
        for (tap, v) in self.target_taps.taps.iter().zip(&self.target_drift_mps) {
            let end = tap.delay_s + v * duration / SPEED_OF_LIGHT;
            if !(end >= 0.0 && end + hi < span) {
                return bad("a drifting target tap leaves the delay span");
            }
        }
        Ok(())
    }

    /// Target tap delays at capture time `t_s`.
    pub fn target_delays_at(&self, t_s: f64) -> Vec<f64> {
        self.target_taps
            .taps
            .iter()
            .enumerate()
            .map(|(i, tap)| {
                let v = self.target_drift_mps.get(i).copied().unwrap_or(0.0);
                tap.delay_s + v * t_s / SPEED_OF_LIGHT
            })
            .collect()
    }
}

/// What was injected into one synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame_index: usize,
    pub timestamp_ns: u64,
    pub timing_offset_s: f64,
    pub global_phase_rad: f64,
    pub ref_delays_s: Vec<f64>,
    pub target_delays_s: Vec<f64>,
    pub target_gains: Vec<Complex64>,
    pub swapped: bool,
    pub pi_shifted: bool,
}

fn frame_rng(seed: u64, frame_index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(frame_index as u64);
    rng
}

fn mean_power(h: &[Complex64]) -> f64 {
    h.iter().map(|x| x.norm_sqr()).sum::<f64>() / h.len() as f64
}

/// Generates frame `frame_index` of the scenario.
pub fn generate_frame(cfg: &ScenarioConfig, frame_index: usize, seed: u64) -> Result<(CsiFrame, GroundTruth)> {
    cfg.validate()?;
    Ok(generate_unchecked(cfg, frame_index, seed))
}

fn generate_unchecked(cfg: &ScenarioConfig, frame_index: usize, seed: u64) -> (CsiFrame, GroundTruth) {
    let layout = &cfg.layout;
    let mut rng = frame_rng(seed, frame_index);

    let (lo, hi) = cfg.timing_offset_range_s;
    let delta = lo + (hi - lo) * rng.random::<f64>();
    let psi = if cfg.random_global_phase {
        2.0 * PI * rng.random::<f64>()
    } else {
        0.0
    };
    let jitter = cfg.backoff_jitter_s * rng.random::<f64>();
    let swapped = rng.random::<f64>() < cfg.faults.swap_prob;
    let pi_shifted = rng.random::<f64>() < cfg.faults.pi_shift_prob;

    let t_s = frame_index as f64 * cfg.frame_interval_s + jitter;
    let timestamp_ns = (t_s * 1e9).round() as u64;

    let ref_delays: Vec<f64> = cfg.ref_taps.taps.iter().map(|t| t.delay_s).collect();
    let target_delays = cfg.target_delays_at(t_s);
    let rotation = Complex64::from_polar(1.0, psi);
    let true_ref: Vec<Complex64> = cfg
        .ref_taps
        .response(layout, &ref_delays, delta)
        .into_iter()
        .map(|h| h * rotation)
        .collect();
    let true_target: Vec<Complex64> = cfg
        .target_taps
        .response(layout, &target_delays, delta)
        .into_iter()
        .map(|h| h * rotation)
        .collect();

    let ref_power = mean_power(&true_ref);
    let target_power = mean_power(&true_target);
    let noise_sigma = cfg
        .snr_db
        .map(|snr| (ref_power / 10f64.powf(snr / 10.0) / 2.0).sqrt());

    let device_gain: Vec<f64> = layout
        .indices()
        .map(|k| {
            let edge = (k as f64 / layout.index_max.max(-layout.index_min) as f64).powi(2);
            let mut db = -cfg.impairments.edge_rolloff_db * edge;
            if layout.notch_indices.binary_search(&k).is_ok() {
                db -= cfg.impairments.notch_attenuation_db;
            }
            if cfg.impairments.blank_dc && layout.dc_indices.binary_search(&k).is_ok() {
                return 0.0;
            }
            10f64.powf(db / 20.0)
        })
        .collect();

    let mut observe = |truth: Vec<Complex64>, power: f64| -> ChainRecord {
        let agc = if power > 0.0 { 1.0 / power.sqrt() } else { 1.0 };
        let csi = truth
            .into_iter()
            .zip(&device_gain)
            .map(|(h, g)| {
                let noise = match noise_sigma {
                    Some(s) => {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im) * s
                    }
                    None => Complex64::new(0.0, 0.0),
                };
                (h + noise) * agc * g
            })
            .collect();
        ChainRecord::new(csi, Some(cfg.tx_power_dbm + 10.0 * power.log10()))
    };

    let reference = observe(true_ref, ref_power);
    let mut target = observe(true_target, target_power);
    if pi_shifted {
        target.csi.iter_mut().for_each(|h| *h = -*h);
    }
    let mut chains = vec![reference, target];
    if swapped {
        chains.swap(0, 1);
    }

    let truth = GroundTruth {
        frame_index,
        timestamp_ns,
        timing_offset_s: delta,
        global_phase_rad: psi,
        ref_delays_s: ref_delays,
        target_delays_s: target_delays,
        target_gains: cfg.target_taps.taps.iter().map(|t| t.gain).collect(),
        swapped,
        pi_shifted,
    };
    (CsiFrame { timestamp_ns, chains }, truth)
}

/// Lazily generates all frames of a scenario.
pub fn generate_capture(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<impl Iterator<Item = (CsiFrame, GroundTruth)> + '_> {
    cfg.validate()?;
    Ok((0..cfg.frame_count).map(move |i| generate_unchecked(cfg, i, seed)))
}

/// Free-space amplitude gain `c / (4π d f)` of a path with the given delay.
pub fn free_space_amplitude(delay_s: f64, center_freq_hz: f64) -> f64 {
    1.0 / (4.0 * PI * delay_s * center_freq_hz)
}

/// A static two-chain scenario: a single line-of-sight reference tap at
/// `d_ref / c` and a three-path target.
pub fn static_scenario() -> ScenarioConfig {
    let params = CalibrationParams::default();
    let tau_ref = params.tau_ref_s();
    let fc = params.center_freq_hz;
    let target = [(30e-9, 0.0, 0.4), (120e-9, -4.0, -1.3), (300e-9, -8.0, 2.2)];
    let a0 = free_space_amplitude(30e-9, fc);
    ScenarioConfig {
        name: "static".into(),
        layout: SubcarrierLayout::he160(),
        ref_taps: TapSet::new(vec![Tap::new(
            tau_ref,
            Complex64::new(free_space_amplitude(tau_ref, fc), 0.0),
        )]),
        target_taps: TapSet::new(
            target
                .iter()
                .map(|&(d, db, ph)| Tap::new(d, Complex64::from_polar(a0 * 10f64.powf(db / 20.0), ph)))
                .collect(),
        ),
        target_drift_mps: Vec::new(),
        timing_offset_range_s: (0.0, CYCLIC_PREFIX_S),
        random_global_phase: true,
        snr_db: Some(30.0),
        frame_count: 1000,
        frame_interval_s: 8e-3,
        backoff_jitter_s: MAX_BACKOFF_JITTER_S,
        faults: FaultInjection::default(),
        impairments: DeviceImpairments::default(),
        tx_power_dbm: 20.0,
        params,
    }
}

/// A corridor-like scenario: a reference tap at `d_ref / c`, a direct target
/// path at 40 ns with corridor echoes at 240 ns and 440 ns (one and two
/// 60 m round trips), and a far-end reflection starting at 140 ns. The target
/// moves toward the transmitter, so all paths shorten except the far-end one.
pub fn corridor_scenario() -> ScenarioConfig {
    let params = CalibrationParams::default();
    let tau_ref = params.tau_ref_s();
    let fc = params.center_freq_hz;
    let a0 = free_space_amplitude(40e-9, fc);
    let speed = 1.0;
    // (delay, power relative to the direct path, phase, drift)
    let paths = [
        (40e-9, 0.0, 0.3, -speed),
        (140e-9, -10.0, 1.7, speed),
        (240e-9, -6.0, -2.1, -speed),
        (440e-9, -12.0, 2.9, -speed),
    ];
    ScenarioConfig {
        name: "corridor".into(),
        layout: SubcarrierLayout::he160(),
        ref_taps: TapSet::new(vec![Tap::new(
            tau_ref,
            Complex64::new(free_space_amplitude(tau_ref, fc), 0.0),
        )]),
        target_taps: TapSet::new(
            paths
                .iter()
                .map(|&(d, db, ph, _)| Tap::new(d, Complex64::from_polar(a0 * 10f64.powf(db / 20.0), ph)))
                .collect(),
        ),
        target_drift_mps: paths.iter().map(|p| p.3).collect(),
        timing_offset_range_s: (680e-9, 800e-9),
        random_global_phase: true,
        snr_db: Some(30.0),
        frame_count: 400,
        frame_interval_s: 8e-3,
        backoff_jitter_s: MAX_BACKOFF_JITTER_S,
        faults: FaultInjection::default(),
        impairments: DeviceImpairments {
            blank_dc: true,
            notch_attenuation_db: 20.0,
            edge_rolloff_db: 3.0,
        },
        tx_power_dbm: 20.0,
        params,
    }
}

/// Looks up a built-in scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "corridor" => Ok(corridor_scenario()),
        "static" => Ok(static_scenario()),
        other => Err(Error::InvalidConfig(format!("unknown scenario preset {other:?}"))),
    }
}
