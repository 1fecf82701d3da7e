//! Reference-anchored delay calibration and phase normalization.
//!
//! For each acquisition the first signal of the reference impulse response is
//! located; both responses are then circularly shifted so that signal sits at
//! the reference line-of-sight delay `d_ref / c`, and rotated so its phase is
//! zero. Because both receive chains share one sampling clock, the same shift
//! and rotation remove the per-acquisition timing and phase offsets from the
//! target as well.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{CalibrationParams, ImpulseResponse};

/// Per-stream tracker state. Owned by one capture stream and updated once
/// per frame, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationState {
    /// Magnitudes of the (reference, target) chains of the previous frame.
    pub prev_magnitudes: Option<[Vec<f64>; 2]>,
    /// Calibrated target taps of the previous frame.
    pub prev_target_ir: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstSignal {
    pub bin: usize,
    pub delay_s: f64,
    pub phase_rad: f64,
}

/// Earliest local maximum of `|h|` within `threshold_db` of the global
/// maximum. A local maximum is strictly greater than both circular
/// neighbours.
pub fn first_signal(ir: &ImpulseResponse, threshold_db: f64) -> Result<FirstSignal> {
    let power: Vec<f64> = ir.taps.iter().map(|t| t.norm_sqr()).collect();
    let n = power.len();
    let peak = power.iter().copied().fold(0.0, f64::max);
    if n < 3 || !(peak > 0.0) {
        return Err(Error::NoSignal);
    }
    let level = peak * 10f64.powf(threshold_db / 10.0);
    let bin = (0..n)
        .find(|&i| {
            let p = power[i];
            p >= level && p > power[(i + n - 1) % n] && p > power[(i + 1) % n]
        })
        .ok_or(Error::NoSignal)?;
    Ok(FirstSignal {
        bin,
        delay_s: ir.delay_of(bin),
        phase_rad: ir.taps[bin].arg(),
    })
}

/// Calibrated reference and target responses of one acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedPair {
    pub h_ref: ImpulseResponse,
    pub h_target: ImpulseResponse,
    /// First-signal delay of the reference before calibration.
    pub tau_star_s: f64,
    /// Reference phase at that delay.
    pub theta_star_rad: f64,
    /// Circular shift applied to both responses, in bins.
    pub shift_bins: i64,
}

fn shift_and_rotate(taps: &[Complex64], shift: i64, rot: Complex64) -> Vec<Complex64> {
    let n = taps.len() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); taps.len()];
    for (i, t) in taps.iter().enumerate() {
        out[(i as i64 + shift).rem_euclid(n) as usize] = t * rot;
    }
    out
}

/// Shifts and rotates both responses so that the reference first signal sits
/// at `τ_ref` with zero phase.
///
/// The shift is an integer number of bins; the sub-bin remainder is carried
/// in `delay_origin_s`, so the reference first signal reads exactly `τ_ref`
/// on the calibrated axis.
pub fn calibrate_pair(
    ref_ir: &ImpulseResponse,
    target_ir: &ImpulseResponse,
    params: &CalibrationParams,
) -> Result<CalibratedPair> {
    if ref_ir.len() != target_ir.len() {
        return Err(Error::LengthMismatch {
            expected: ref_ir.len(),
            found: target_ir.len(),
        });
    }
    if ref_ir.delay_bin_s != target_ir.delay_bin_s {
        return Err(Error::InvalidConfig(
            "reference and target delay grids differ".into(),
        ));
    }
    let fs = first_signal(ref_ir, params.first_peak_threshold_db)?;
    let tau_ref = params.tau_ref_s();
    let dt = ref_ir.delay_bin_s;
    let n = ref_ir.len() as i64;
    let shift = ((tau_ref - fs.delay_s) / dt).round() as i64;
    let anchored_bin = (fs.bin as i64 + shift).rem_euclid(n);
    let origin = tau_ref - anchored_bin as f64 * dt;
    let rot = Complex64::from_polar(1.0, -fs.phase_rad);

    let make = |ir: &ImpulseResponse| ImpulseResponse {
        taps: shift_and_rotate(&ir.taps, shift, rot),
        delay_bin_s: dt,
        delay_origin_s: origin,
    };
    Ok(CalibratedPair {
        h_ref: make(ref_ir),
        h_target: make(target_ir),
        tau_star_s: fs.delay_s,
        theta_star_rad: fs.phase_rad,
        shift_bins: shift,
    })
}

/// Resolves the ±π ambiguity of the target: keeps whichever of `h` and `−h`
/// lies closer to the previous calibrated target. Returns whether the target
/// was negated. Ties keep `h`.
pub fn fix_pi_shift(pair: &mut CalibratedPair, state: &mut CalibrationState) -> bool {
    let flip = match state.prev_target_ir.as_ref() {
        Some(prev) if prev.len() == pair.h_target.len() => {
            // |h − p|² − |−h − p|² = −4·Re⟨h, p⟩
            let corr: f64 = pair
                .h_target
                .taps
                .iter()
                .zip(prev)
                .map(|(h, p)| (h * p.conj()).re)
                .sum();
            corr < 0.0
        }
        _ => false,
    };
    if flip {
        pair.h_target.taps.iter_mut().for_each(|t| *t = -*t);
    }
    state.prev_target_ir = Some(pair.h_target.taps.clone());
    flip
}

fn average(items: &[&ImpulseResponse]) -> ImpulseResponse {
    let first = items[0];
    let scale = 1.0 / items.len() as f64;
    let mut taps = vec![Complex64::new(0.0, 0.0); first.len()];
    let mut origin = 0.0;
    for ir in items {
        for (acc, t) in taps.iter_mut().zip(&ir.taps) {
            *acc += t;
        }
        origin += ir.delay_origin_s;
    }
    taps.iter_mut().for_each(|t| *t *= scale);
    ImpulseResponse {
        taps,
        delay_bin_s: first.delay_bin_s,
        delay_origin_s: origin * scale,
    }
}

fn check_series(series: &[&ImpulseResponse], window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) || window > series.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    if let Some(bad) = series.iter().find(|ir| ir.len() != series[0].len()) {
        return Err(Error::LengthMismatch {
            expected: series[0].len(),
            found: bad.len(),
        });
    }
    Ok(())
}

/// Centered complex moving average along time, per delay bin. Windows shrink
/// at the ends of the series. The delay origin of each output is the mean of
/// the origins it averages.
pub fn moving_average(series: &[ImpulseResponse], window: usize) -> Result<Vec<ImpulseResponse>> {
    let refs: Vec<&ImpulseResponse> = series.iter().collect();
    moving_average_refs(&refs, window)
}

/// [`moving_average`] over the calibrated targets of a pair series.
pub fn moving_average_pairs(
    series: &[CalibratedPair],
    window: usize,
) -> Result<Vec<ImpulseResponse>> {
    let refs: Vec<&ImpulseResponse> = series.iter().map(|p| &p.h_target).collect();
    moving_average_refs(&refs, window)
}

fn moving_average_refs(series: &[&ImpulseResponse], window: usize) -> Result<Vec<ImpulseResponse>> {
    check_series(series, window)?;
    let half = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(n - 1);
            average(&series[lo..=hi])
        })
        .collect())
}

/// Streaming form of [`moving_average`] holding at most `window` responses.
#[derive(Debug)]
pub struct StreamingMovingAverage {
    window: usize,
    buffer: VecDeque<ImpulseResponse>,
    pushed: usize,
    emitted: usize,
}

impl StreamingMovingAverage {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 || window.is_multiple_of(2) {
            return Err(Error::WindowTooLarge { window, len: 0 });
        }
        Ok(StreamingMovingAverage {
            window,
            buffer: VecDeque::with_capacity(window),
            pushed: 0,
            emitted: 0,
        })
    }

    fn half(&self) -> usize {
        self.window / 2
    }

    /// Emits the average for frame `j` using buffered frames up to `last`.
    fn emit(&mut self, last: usize) -> (usize, ImpulseResponse) {
        let j = self.emitted;
        let lo = j.saturating_sub(self.half());
        let hi = (j + self.half()).min(last);
        let first_buffered = self.pushed - self.buffer.len();
        let items: Vec<&ImpulseResponse> = (lo..=hi)
            .map(|i| &self.buffer[i - first_buffered])
            .collect();
        let out = average(&items);
        self.emitted += 1;
        (j, out)
    }

    /// Adds the next response; returns the average that became complete, if
    /// any, with its frame position in the pushed sequence.
    pub fn push(&mut self, ir: ImpulseResponse) -> Result<Option<(usize, ImpulseResponse)>> {
        if let Some(first) = self.buffer.front() {
            if first.len() != ir.len() {
                return Err(Error::LengthMismatch {
                    expected: first.len(),
                    found: ir.len(),
                });
            }
        }
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(ir);
        self.pushed += 1;
        if self.pushed > self.half() {
            let last = self.pushed - 1;
            Ok(Some(self.emit(last)))
        } else {
            Ok(None)
        }
    }

    /// Flushes the trailing, truncated-window averages.
    pub fn finish(mut self) -> Vec<(usize, ImpulseResponse)> {
        let mut out = Vec::new();
        if self.pushed == 0 {
            return out;
        }
        let last = self.pushed - 1;
        while self.emitted < self.pushed {
            out.push(self.emit(last));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SPEED_OF_LIGHT;

    fn ir_with(taps: &[(usize, Complex64)], n: usize, dt: f64) -> ImpulseResponse {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for &(i, t) in taps {
            // Give each tap a small two-sided skirt so it is a strict local max.
            v[i] += t;
            v[(i + 1) % n] += t * 0.5;
            v[(i + n - 1) % n] += t * 0.5;
        }
        ImpulseResponse {
            taps: v,
            delay_bin_s: dt,
            delay_origin_s: 0.0,
        }
    }

    fn db_amp(db: f64) -> f64 {
        10f64.powf(db / 20.0)
    }

    #[test]
    fn earliest_qualifying_peak() {
        let dt = 1e-9;
        let ir = ir_with(
            &[(10, Complex64::new(1.0, 0.0)), (40, Complex64::new(db_amp(-3.0), 0.0))],
            128,
            dt,
        );
        let fs = first_signal(&ir, -15.0).unwrap();
        assert_eq!(fs.bin, 10);
        assert!((fs.delay_s - 10e-9).abs() < 1e-18);
    }

    #[test]
    fn early_tap_below_threshold_is_skipped() {
        let ir = ir_with(
            &[
                (10, Complex64::new(db_amp(-20.0), 0.0)),
                (40, Complex64::from_polar(1.0, 0.7)),
            ],
            128,
            1e-9,
        );
        let fs = first_signal(&ir, -15.0).unwrap();
        assert_eq!(fs.bin, 40);
        assert!((fs.phase_rad - 0.7).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_no_signal() {
        let ir = ImpulseResponse {
            taps: vec![Complex64::new(0.0, 0.0); 64],
            delay_bin_s: 1e-9,
            delay_origin_s: 0.0,
        };
        assert!(matches!(first_signal(&ir, -15.0), Err(Error::NoSignal)));
        let flat = ImpulseResponse {
            taps: vec![Complex64::new(1.0, 0.0); 64],
            ..ir
        };
        assert!(matches!(first_signal(&flat, -15.0), Err(Error::NoSignal)));
    }

    #[test]
    fn identity_when_already_anchored() {
        let params = CalibrationParams::default();
        let dt = 0.78125e-9;
        let mut ir = ir_with(&[(13, Complex64::new(1.0, 0.0)), (60, Complex64::new(0.3, 0.2))], 256, dt);
        ir.delay_origin_s = params.tau_ref_s() - 13.0 * dt;
        let target = ir_with(&[(90, Complex64::new(0.5, -0.1))], 256, dt);
        let target = ImpulseResponse {
            delay_origin_s: ir.delay_origin_s,
            ..target
        };
        let pair = calibrate_pair(&ir, &target, &params).unwrap();
        assert_eq!(pair.shift_bins, 0);
        assert_eq!(pair.h_ref, ir);
        assert_eq!(pair.h_target, target);
    }

    #[test]
    fn shift_and_rotation_shared() {
        let params = CalibrationParams::default();
        let dt = 0.78125e-9;
        let n = 4096;
        let ref_ir = ir_with(&[(900, Complex64::from_polar(1.0, 1.1))], n, dt);
        let tgt_ir = ir_with(&[(950, Complex64::from_polar(0.4, -0.5))], n, dt);
        let pair = calibrate_pair(&ref_ir, &tgt_ir, &params).unwrap();
        let fs = first_signal(&pair.h_ref, -15.0).unwrap();
        assert!((fs.delay_s - params.tau_ref_s()).abs() < 1e-15);
        assert!(fs.phase_rad.abs() < 1e-12);
        assert!((pair.theta_star_rad - 1.1).abs() < 1e-12);
        let tgt = first_signal(&pair.h_target, -15.0).unwrap();
        assert!((tgt.delay_s - (params.tau_ref_s() + 50.0 * dt)).abs() < 1e-15);
        assert!((tgt.phase_rad - (-0.5 - 1.1)).abs() < 1e-12);
        assert!((params.tau_ref_s() - 3.0 / SPEED_OF_LIGHT).abs() < 1e-24);
    }

    #[test]
    fn mismatched_pair() {
        let a = ir_with(&[(3, Complex64::new(1.0, 0.0))], 32, 1e-9);
        let b = ir_with(&[(3, Complex64::new(1.0, 0.0))], 64, 1e-9);
        assert!(calibrate_pair(&a, &b, &CalibrationParams::default()).is_err());
    }

    fn pair_of(taps: Vec<Complex64>) -> CalibratedPair {
        let ir = ImpulseResponse {
            taps,
            delay_bin_s: 1e-9,
            delay_origin_s: 0.0,
        };
        CalibratedPair {
            h_ref: ir.clone(),
            h_target: ir,
            tau_star_s: 0.0,
            theta_star_rad: 0.0,
            shift_bins: 0,
        }
    }

    #[test]
    fn pi_shift_undone() {
        let taps: Vec<Complex64> = (0..32).map(|i| Complex64::from_polar(1.0, i as f64 * 0.3)).collect();
        let mut state = CalibrationState::default();
        let mut first = pair_of(taps.clone());
        assert!(!fix_pi_shift(&mut first, &mut state));
        assert_eq!(first.h_target.taps, taps);

        let mut flipped = pair_of(taps.iter().map(|t| -t).collect());
        assert!(fix_pi_shift(&mut flipped, &mut state));
        assert_eq!(flipped.h_target.taps, taps);

        let mut same = pair_of(taps.clone());
        assert!(!fix_pi_shift(&mut same, &mut state));
        assert_eq!(same.h_target.taps, taps);
    }

    #[test]
    fn moving_average_constant_and_edges() {
        let ir = |v: f64| ImpulseResponse {
            taps: vec![Complex64::new(v, -v); 4],
            delay_bin_s: 1e-9,
            delay_origin_s: 0.0,
        };
        let series: Vec<_> = (0..5).map(|_| ir(2.0)).collect();
        assert_eq!(moving_average(&series, 3).unwrap(), series);

        let ramp: Vec<_> = (0..5).map(|i| ir(i as f64)).collect();
        let out = moving_average(&ramp, 3).unwrap();
        // Truncated windows: frame 0 averages {0, 1}, frame 4 averages {3, 4}.
        assert!((out[0].taps[0].re - 0.5).abs() < 1e-15);
        assert!((out[2].taps[0].re - 2.0).abs() < 1e-15);
        assert!((out[4].taps[0].re - 3.5).abs() < 1e-15);
    }

    #[test]
    fn moving_average_window_checks() {
        let series = vec![
            ImpulseResponse {
                taps: vec![Complex64::new(1.0, 0.0); 4],
                delay_bin_s: 1e-9,
                delay_origin_s: 0.0,
            };
            5
        ];
        assert!(matches!(moving_average(&series, 7), Err(Error::WindowTooLarge { .. })));
        assert!(matches!(moving_average(&series, 4), Err(Error::WindowTooLarge { .. })));
        assert!(moving_average(&series, 5).is_ok());
    }

    #[test]
    fn streaming_matches_batch() {
        let series: Vec<ImpulseResponse> = (0..23)
            .map(|i| ImpulseResponse {
                taps: (0..8)
                    .map(|k| Complex64::new((i * k) as f64 % 7.0, (i + k) as f64 % 3.0))
                    .collect(),
                delay_bin_s: 1e-9,
                delay_origin_s: i as f64 * 1e-12,
            })
            .collect();
        for window in [1usize, 3, 11] {
            let batch = moving_average(&series, window).unwrap();
            let mut s = StreamingMovingAverage::new(window).unwrap();
            let mut out = Vec::new();
            for ir in &series {
                out.extend(s.push(ir.clone()).unwrap());
            }
            out.extend(s.finish());
            assert_eq!(out.len(), series.len());
            for (j, (idx, ir)) in out.iter().enumerate() {
                assert_eq!(*idx, j);
                for (a, b) in ir.taps.iter().zip(&batch[j].taps) {
                    assert!((a - b).norm() < 1e-12);
                }
                assert!((ir.delay_origin_s - batch[j].delay_origin_s).abs() < 1e-20);
            }
        }
    }
}
