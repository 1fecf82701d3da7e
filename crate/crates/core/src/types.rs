use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One receive chain of one acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    /// Equivalent-baseband transfer function, ascending subcarrier index.
    pub csi: Vec<Complex64>,
    /// Received signal strength; `None` when the capture did not report it.
    pub rss_dbm: Option<f64>,
}

impl ChainRecord {
    pub fn new(csi: Vec<Complex64>, rss_dbm: Option<f64>) -> Self {
        ChainRecord { csi, rss_dbm }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.csi.iter().map(|h| h.norm()).collect()
    }

    pub fn mean_power(&self) -> f64 {
        if self.csi.is_empty() {
            return 0.0;
        }
        self.csi.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.csi.len() as f64
    }
}

/// One CSI acquisition across all receive chains.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    /// Nanoseconds since capture start.
    pub timestamp_ns: u64,
    pub chains: Vec<ChainRecord>,
}

impl CsiFrame {
    /// Checks chain count, vector lengths and finiteness against `layout`.
    pub fn validate(&self, layout: &SubcarrierLayout) -> Result<()> {
        if self.chains.len() < 2 {
            return Err(Error::ChainCount {
                expected: 2,
                found: self.chains.len(),
            });
        }
        for chain in &self.chains {
            if chain.csi.len() != layout.count {
                return Err(Error::LengthMismatch {
                    expected: layout.count,
                    found: chain.csi.len(),
                });
            }
            if chain.csi.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
                return Err(Error::InvalidConfig("non-finite CSI value".into()));
            }
        }
        Ok(())
    }

    pub fn chain(&self, index: usize) -> Result<&ChainRecord> {
        self.chains.get(index).ok_or(Error::ChainIndex {
            index,
            chains: self.chains.len(),
        })
    }
}

/// Complex channel taps on a uniform, circular delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<Complex64>,
    /// Delay bin width in seconds.
    pub delay_bin_s: f64,
    /// Absolute delay of tap 0.
    pub delay_origin_s: f64,
}

impl ImpulseResponse {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn delay_of(&self, bin: usize) -> f64 {
        self.delay_origin_s + bin as f64 * self.delay_bin_s
    }

    /// Nearest bin to an absolute delay, wrapped onto the circular axis.
    pub fn bin_of(&self, delay_s: f64) -> usize {
        let n = self.taps.len() as i64;
        let b = ((delay_s - self.delay_origin_s) / self.delay_bin_s).round() as i64;
        b.rem_euclid(n) as usize
    }

    /// Full unambiguous delay span covered by the taps.
    pub fn span_s(&self) -> f64 {
        self.taps.len() as f64 * self.delay_bin_s
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.norm()).collect()
    }

    /// Tap powers in dB (`20·log10|h|`).
    pub fn power_db(&self) -> Vec<f64> {
        self.taps.iter().map(|t| 10.0 * t.norm_sqr().log10()).collect()
    }
}

/// Reference-chain geometry and detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    /// Free-space distance between the transmitter and the reference antenna.
    pub d_ref_m: f64,
    #[serde(default = "default_c")]
    pub c_mps: f64,
    pub center_freq_hz: f64,
    /// First-signal threshold relative to the global maximum, in dB (negative).
    pub first_peak_threshold_db: f64,
    pub ma_window: usize,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            d_ref_m: 3.0,
            c_mps: SPEED_OF_LIGHT,
            center_freq_hz: 5.25e9,
            first_peak_threshold_db: -15.0,
            ma_window: 11,
        }
    }
}

impl CalibrationParams {
    /// Line-of-sight delay of the reference channel, `d_ref / c`.
    pub fn tau_ref_s(&self) -> f64 {
        self.d_ref_m / self.c_mps
    }

    /// Friis free-space power gain `(c / 4π d f)²` of the reference channel.
    pub fn free_space_gain(&self) -> f64 {
        let a = self.c_mps / (4.0 * std::f64::consts::PI * self.d_ref_m * self.center_freq_hz);
        a * a
    }

    pub fn free_space_gain_db(&self) -> f64 {
        10.0 * self.free_space_gain().log10()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_ref_m.is_finite() && self.d_ref_m > 0.0) {
            return Err(Error::InvalidConfig("d_ref_m must be positive".into()));
        }
        if !(self.c_mps.is_finite() && self.c_mps > 0.0) {
            return Err(Error::InvalidConfig("c_mps must be positive".into()));
        }
        if !(self.center_freq_hz.is_finite() && self.center_freq_hz > 0.0) {
            return Err(Error::InvalidConfig("center_freq_hz must be positive".into()));
        }
        if !(self.first_peak_threshold_db.is_finite() && self.first_peak_threshold_db <= 0.0) {
            return Err(Error::InvalidConfig(
                "first_peak_threshold_db must be finite and <= 0".into(),
            ));
        }
        if self.ma_window == 0 || self.ma_window.is_multiple_of(2) {
            return Err(Error::InvalidConfig("ma_window must be odd and positive".into()));
        }
        Ok(())
    }
}
