//! Frequency-to-delay transform.
//!
//! CSI is windowed, scaled back to the unwindowed coherent gain, zero padded
//! to `κ` times the power-of-two base grid and inverse transformed. Taps are
//! normalized by the base grid length, so oversampling interpolates between
//! the `κ = 1` taps without changing their values.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;
use crate::types::ImpulseResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Blackman,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Blackman => blackman_window(n),
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Blackman => "blackman",
        })
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "none" => Ok(WindowKind::Rectangular),
            "blackman" => Ok(WindowKind::Blackman),
            other => Err(Error::InvalidConfig(format!("unknown window {other:?}"))),
        }
    }
}

/// Symmetric classic Blackman window
/// `0.42 − 0.5·cos(2πi/(N−1)) + 0.08·cos(4πi/(N−1))`.
///
/// Evaluated on the first half and mirrored so the window is exactly
/// symmetric; the endpoints are exactly zero.
pub fn blackman_window(n: usize) -> Vec<f64> {
    match n {
        0 => return Vec::new(),
        1 => return vec![1.0],
        _ => {}
    }
    let m = (n - 1) as f64;
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let x = 2.0 * PI * i as f64 / m;
        let v = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
        w[i] = v.max(0.0);
        w[n - 1 - i] = w[i];
    }
    w[0] = 0.0;
    w[n - 1] = 0.0;
    if n % 2 == 1 {
        w[n / 2] = 1.0;
    }
    w
}

/// Ratio of rectangular to windowed coherent gain, `N / Σw`.
pub fn compensation_gain(window: &[f64]) -> f64 {
    window.len() as f64 / window.iter().sum::<f64>()
}

/// Applies the window and the coherent-gain compensation.
pub fn window_and_compensate(csi: &[Complex64], kind: WindowKind) -> Vec<Complex64> {
    let w = kind.coefficients(csi.len());
    let g = compensation_gain(&w);
    csi.iter().zip(&w).map(|(h, wi)| h * (wi * g)).collect()
}

/// Reusable transform for one layout, oversampling factor and window.
///
/// Immutable after construction, so one instance can be shared by workers.
#[derive(Clone)]
pub struct Sounder {
    layout: SubcarrierLayout,
    kappa: usize,
    window: WindowKind,
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Sounder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sounder")
            .field("count", &self.layout.count)
            .field("kappa", &self.kappa)
            .field("window", &self.window)
            .finish()
    }
}

impl Sounder {
    pub fn new(layout: &SubcarrierLayout, kappa: usize, window: WindowKind) -> Result<Self> {
        layout.validate()?;
        if kappa == 0 {
            return Err(Error::InvalidConfig("oversampling factor must be >= 1".into()));
        }
        if layout.count < 3 {
            return Err(Error::InvalidLayout("need at least 3 subcarriers".into()));
        }
        let coeffs = window.coefficients(layout.count);
        let g = compensation_gain(&coeffs);
        let weights = coeffs.into_iter().map(|w| w * g).collect();
        let fft = FftPlanner::new().plan_fft_inverse(kappa * layout.base_fft_len());
        Ok(Sounder {
            layout: layout.clone(),
            kappa,
            window,
            weights,
            fft,
        })
    }

    pub fn layout(&self) -> &SubcarrierLayout {
        &self.layout
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn fft_len(&self) -> usize {
        self.fft.len()
    }

    /// `Δτ = 1/(κ·B)` with `B` the base-grid bandwidth.
    pub fn delay_bin_s(&self) -> f64 {
        1.0 / (self.fft_len() as f64 * self.layout.spacing_hz)
    }

    /// Factor relating tap energy to the energy of the windowed,
    /// compensated spectrum: `Σ|h|² = scale · Σ|X|²`.
    pub fn parseval_scale(&self) -> f64 {
        self.kappa as f64 / self.layout.base_fft_len() as f64
    }

    /// Windowed and compensated CSI, as fed to the transform.
    pub fn shaped(&self, csi: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(csi)?;
        Ok(csi.iter().zip(&self.weights).map(|(h, w)| h * w).collect())
    }

    fn check_len(&self, csi: &[Complex64]) -> Result<()> {
        if csi.len() != self.layout.count {
            return Err(Error::LengthMismatch {
                expected: self.layout.count,
                found: csi.len(),
            });
        }
        Ok(())
    }

    pub fn impulse_response(&self, csi: &[Complex64]) -> Result<ImpulseResponse> {
        self.check_len(csi)?;
        let n = self.fft_len();
        let mut grid = vec![Complex64::new(0.0, 0.0); n];
        for ((k, h), w) in self.layout.indices().zip(csi).zip(&self.weights) {
            grid[(k as i64).rem_euclid(n as i64) as usize] = h * w;
        }
        self.fft.process(&mut grid);
        let norm = 1.0 / self.layout.base_fft_len() as f64;
        grid.iter_mut().for_each(|t| *t *= norm);
        Ok(ImpulseResponse {
            taps: grid,
            delay_bin_s: self.delay_bin_s(),
            delay_origin_s: 0.0,
        })
    }
}

/// One-shot transform; prefer [`Sounder`] when processing many frames.
pub fn to_impulse_response(
    csi: &[Complex64],
    layout: &SubcarrierLayout,
    kappa: usize,
    window: WindowKind,
) -> Result<ImpulseResponse> {
    Sounder::new(layout, kappa, window)?.impulse_response(csi)
}
