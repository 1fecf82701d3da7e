//! Statistics over calibrated impulse-response series.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;
use crate::phase::{fit_line, unwrap_phase};
use crate::types::ImpulseResponse;

/// Default jump gate of the track associator, in resolution bins per frame.
pub const DEFAULT_TRACK_GATE_BINS: f64 = 3.0;

/// Default half-width of the signal masks used for noise-floor estimation,
/// in resolution bins.
pub const DEFAULT_MASK_HALF_WIDTH_BINS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub delay_s: f64,
    pub prob: f64,
}

/// Empirical CDF as a step function: one point per distinct value, carrying
/// the fraction of samples at or below it.
pub fn delay_cdf(samples: &[f64]) -> Result<Vec<CdfPoint>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let prob = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.delay_s == x => last.prob = prob,
            _ => out.push(CdfPoint { delay_s: x, prob }),
        }
    }
    Ok(out)
}

/// Kolmogorov–Smirnov distance between the samples and `U[lo, hi]`.
pub fn ks_statistic_uniform(samples: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(hi > lo) {
        return Err(Error::InvalidConfig("uniform support must be non-empty".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let cdf = |x: f64| ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// Delay interval `[start_s, end_s]` on the absolute axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl DelayWindow {
    pub fn around(centre_s: f64, half_width_s: f64) -> Self {
        DelayWindow {
            start_s: centre_s - half_width_s,
            end_s: centre_s + half_width_s,
        }
    }

    /// Membership on a circular axis of period `span_s`.
    fn contains(&self, delay_s: f64, span_s: f64) -> bool {
        let width = self.end_s - self.start_s;
        if width >= span_s {
            return true;
        }
        (delay_s - self.start_s).rem_euclid(span_s) <= width
    }
}

/// Mean tap power in dB outside the exclusion windows. Returns
/// `f64::NEG_INFINITY` when every remaining tap is exactly zero.
pub fn noise_floor_db(ir: &ImpulseResponse, exclusions: &[DelayWindow]) -> Result<f64> {
    let power = noise_power(ir, exclusions)?;
    Ok(if power > 0.0 {
        10.0 * power.log10()
    } else {
        f64::NEG_INFINITY
    })
}

/// Linear mean tap power outside the exclusion windows.
pub fn noise_power(ir: &ImpulseResponse, exclusions: &[DelayWindow]) -> Result<f64> {
    let span = ir.span_s();
    let (sum, count) = ir
        .taps
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let d = ir.delay_of(*i);
            !exclusions.iter().any(|w| w.contains(d, span))
        })
        .fold((0.0, 0usize), |(s, c), (_, t)| (s + t.norm_sqr(), c + 1));
    if count == 0 {
        return Err(Error::FullyExcluded);
    }
    Ok(sum / count as f64)
}

/// Nominal delay resolution `1 / (count · Δf)`.
pub fn resolution_s(layout: &SubcarrierLayout) -> f64 {
    1.0 / layout.bandwidth_hz()
}

/// Unwrapped phase over ascending subcarrier index.
pub fn unwrapped_phase_spectrum(csi: &[Complex64]) -> Vec<f64> {
    unwrap_phase(&csi.iter().map(|h| h.arg()).collect::<Vec<_>>())
}

/// Dominant-path delay from the least-squares slope of the unwrapped phase,
/// `τ = −slope / (2π Δf)`.
pub fn phase_slope_delay(unwrapped: &[f64], spacing_hz: f64) -> Option<f64> {
    let x: Vec<f64> = (0..unwrapped.len()).map(|i| i as f64).collect();
    fit_line(&x, unwrapped).map(|f| -f.slope / (2.0 * PI * spacing_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub delay_s: f64,
    pub power_db: f64,
}

/// All strict local maxima of `|h|` (circular neighbours) within
/// `threshold_db` of the strongest tap, in bin order.
pub fn local_peaks(ir: &ImpulseResponse, threshold_db: f64) -> Vec<Peak> {
    let power: Vec<f64> = ir.taps.iter().map(|t| t.norm_sqr()).collect();
    let n = power.len();
    let max = power.iter().copied().fold(0.0, f64::max);
    if n < 3 || !(max > 0.0) {
        return Vec::new();
    }
    let level = max * 10f64.powf(threshold_db / 10.0);
    (0..n)
        .filter(|&i| {
            let p = power[i];
            p >= level && p > power[(i + n - 1) % n] && p > power[(i + 1) % n]
        })
        .map(|i| Peak {
            bin: i,
            delay_s: ir.delay_of(i),
            power_db: 10.0 * power[i].log10(),
        })
        .collect()
}

/// Exclusion windows of `± half_width_s` around each peak.
pub fn peak_exclusions(peaks: &[Peak], half_width_s: f64) -> Vec<DelayWindow> {
    peaks
        .iter()
        .map(|p| DelayWindow::around(p.delay_s, half_width_s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: usize,
    pub delay_s: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn first(&self) -> &TrackPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrackPoint {
        self.points.last().expect("tracks are never empty")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Least-squares delay drift in seconds per frame.
    pub fn slope_s_per_frame(&self) -> Option<f64> {
        let x: Vec<f64> = self.points.iter().map(|p| p.frame as f64).collect();
        let y: Vec<f64> = self.points.iter().map(|p| p.delay_s).collect();
        fit_line(&x, &y).map(|f| f.slope)
    }

    pub fn at_frame(&self, frame: usize) -> Option<&TrackPoint> {
        self.points.iter().find(|p| p.frame == frame)
    }
}

/// Greedy nearest-delay associator. A track continues only from the frame
/// immediately before; peaks that find no track within the gate start new
/// tracks.
#[derive(Debug, Clone)]
pub struct TrackBuilder {
    gate_s: f64,
    tracks: Vec<Track>,
}

impl TrackBuilder {
    pub fn new(gate_s: f64) -> Self {
        TrackBuilder {
            gate_s,
            tracks: Vec::new(),
        }
    }

    pub fn push(&mut self, frame: usize, peaks: &[Peak]) {
        let active: Vec<usize> = (0..self.tracks.len())
            .filter(|&t| frame > 0 && self.tracks[t].last().frame == frame - 1)
            .collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &t in &active {
            let last = self.tracks[t].last().delay_s;
            for (p, peak) in peaks.iter().enumerate() {
                let d = (peak.delay_s - last).abs();
                if d <= self.gate_s {
                    pairs.push((d, t, p));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; self.tracks.len()];
        let mut peak_used = vec![false; peaks.len()];
        for (_, t, p) in pairs {
            if track_used[t] || peak_used[p] {
                continue;
            }
            track_used[t] = true;
            peak_used[p] = true;
            self.tracks[t].points.push(TrackPoint {
                frame,
                delay_s: peaks[p].delay_s,
                power_db: peaks[p].power_db,
            });
        }
        for (p, peak) in peaks.iter().enumerate() {
            if !peak_used[p] {
                self.tracks.push(Track {
                    points: vec![TrackPoint {
                        frame,
                        delay_s: peak.delay_s,
                        power_db: peak.power_db,
                    }],
                });
            }
        }
    }

    /// Tracks ordered by start frame, then start delay.
    pub fn finish(mut self) -> Vec<Track> {
        self.tracks.sort_by(|a, b| {
            a.first()
                .frame
                .cmp(&b.first().frame)
                .then(a.first().delay_s.total_cmp(&b.first().delay_s))
        });
        self.tracks
    }
}

/// Per-frame peak picking followed by greedy track association with a jump
/// gate of `gate_s` per frame.
pub fn extract_peak_tracks(series: &[ImpulseResponse], threshold_db: f64, gate_s: f64) -> Vec<Track> {
    let mut builder = TrackBuilder::new(gate_s);
    for (frame, ir) in series.iter().enumerate() {
        builder.push(frame, &local_peaks(ir, threshold_db));
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_of_ties() {
        let cdf = delay_cdf(&[5e-9, 5e-9, 5e-9]).unwrap();
        assert_eq!(cdf, vec![CdfPoint { delay_s: 5e-9, prob: 1.0 }]);
        assert!(matches!(delay_cdf(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn cdf_steps() {
        let cdf = delay_cdf(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        let probs: Vec<f64> = cdf.iter().map(|p| p.prob).collect();
        assert_eq!(probs, vec![0.25, 0.75, 1.0]);
    }

    #[test]
    fn ks_of_perfect_grid() {
        // Midpoints of n equal cells are at distance 1/(2n) from the uniform CDF.
        let n = 100;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic_uniform(&s, 0.0, 1.0).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
    }

    fn flat_ir(n: usize, v: Complex64) -> ImpulseResponse {
        ImpulseResponse {
            taps: vec![v; n],
            delay_bin_s: 1e-9,
            delay_origin_s: 0.0,
        }
    }

    #[test]
    fn floor_with_exclusions() {
        let mut ir = flat_ir(100, Complex64::new(0.01, 0.0));
        ir.taps[10] = Complex64::new(1.0, 0.0);
        let w = [DelayWindow::around(10e-9, 2e-9)];
        let f = noise_floor_db(&ir, &w).unwrap();
        assert!((f + 40.0).abs() < 1e-9);
        // Window wrapping around the end of the axis.
        let mut ir = flat_ir(100, Complex64::new(0.01, 0.0));
        ir.taps[99] = Complex64::new(1.0, 0.0);
        ir.taps[0] = Complex64::new(1.0, 0.0);
        let f = noise_floor_db(&ir, &[DelayWindow::around(-0.5e-9, 1e-9)]).unwrap();
        assert!((f + 40.0).abs() < 1e-9);
    }

    #[test]
    fn floor_edge_cases() {
        let ir = flat_ir(10, Complex64::new(0.0, 0.0));
        assert_eq!(noise_floor_db(&ir, &[]).unwrap(), f64::NEG_INFINITY);
        let all = [DelayWindow { start_s: -1.0, end_s: 1.0 }];
        assert!(matches!(noise_floor_db(&ir, &all), Err(Error::FullyExcluded)));
    }

    #[test]
    fn phase_slope_single_tap() {
        let layout = SubcarrierLayout::he160();
        let tau = 50e-9;
        let csi: Vec<Complex64> = layout
            .indices()
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * layout.frequency_offset_hz(k) * tau + 0.4))
            .collect();
        let u = unwrapped_phase_spectrum(&csi);
        let d = phase_slope_delay(&u, layout.spacing_hz).unwrap();
        assert!((d - tau).abs() < 0.5e-9);
        let flat = vec![Complex64::new(2.0, 0.0); 64];
        assert!(unwrapped_phase_spectrum(&flat).iter().all(|&p| p == 0.0));
    }

    fn bump_ir(n: usize, dt: f64, taps: &[(f64, f64)]) -> ImpulseResponse {
        // Raised-cosine lobes of half-width 4 bins.
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for &(delay, amp) in taps {
            let c = delay / dt;
            for (i, slot) in v.iter_mut().enumerate() {
                let x = i as f64 - c;
                if x.abs() < 4.0 {
                    *slot += amp * 0.5 * (1.0 + (PI * x / 4.0).cos());
                }
            }
        }
        ImpulseResponse {
            taps: v,
            delay_bin_s: dt,
            delay_origin_s: 0.0,
        }
    }

    #[test]
    fn static_tap_single_track() {
        let series: Vec<_> = (0..20).map(|_| bump_ir(256, 1e-9, &[(50e-9, 1.0)])).collect();
        let tracks = extract_peak_tracks(&series, -20.0, DEFAULT_TRACK_GATE_BINS * 6.32e-9);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 20);
        assert!(tracks[0].points.iter().all(|p| (p.delay_s - 50e-9).abs() < 1e-15));
    }

    #[test]
    fn drifting_tap_slope() {
        let dt = 0.78125e-9;
        let series: Vec<_> = (0..60)
            .map(|f| bump_ir(1024, dt, &[(100e-9 + 0.5e-9 * f as f64, 1.0), (400e-9, 0.5)]))
            .collect();
        let tracks = extract_peak_tracks(&series, -20.0, DEFAULT_TRACK_GATE_BINS * 6.32e-9);
        assert_eq!(tracks.len(), 2);
        let slope = tracks[0].slope_s_per_frame().unwrap();
        assert!((slope - 0.5e-9).abs() < 0.05e-9, "slope {slope}");
        assert!(tracks[1].slope_s_per_frame().unwrap().abs() < 1e-15);
    }
}
