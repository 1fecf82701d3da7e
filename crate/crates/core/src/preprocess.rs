//! Per-frame CSI sanitization.
//!
//! Runs before the delay-domain transform: pilot and DC-gap interpolation,
//! notch repair, power flattening, receive-chain swap correction and absolute
//! power scaling against the reference chain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationState;
use crate::error::{Error, Result};
use crate::layout::{contiguous_runs, SubcarrierLayout};
use crate::phase::{fit_line, unwrap_phase, wrap_to_pi};
use crate::types::{CalibrationParams, ChainRecord, CsiFrame};

/// Valid subcarriers used on each side of the DC gap for the phase fits.
pub const DC_CONTEXT: usize = 10;

fn position(layout: &SubcarrierLayout, k: i32) -> usize {
    (k - layout.index_min) as usize
}

/// Shifts `phase` by a multiple of 2π to land as close as possible to `target`.
fn nearest_branch(phase: f64, target: f64) -> f64 {
    target + wrap_to_pi(phase - target)
}

/// Fills the DC gap.
///
/// Magnitudes are interpolated linearly between the subcarriers bordering the
/// gap. Phases are rebuilt in two steps: a line fitted to the unwrapped phases
/// of the `context` subcarriers below the gap is extrapolated to the first
/// subcarrier above it, which fixes that subcarrier's 2π branch; the gap is
/// then filled from a line regressed over `context` subcarriers on both sides.
pub fn interpolate_dc_gap(
    chain: &ChainRecord,
    layout: &SubcarrierLayout,
    context: usize,
) -> Result<ChainRecord> {
    if chain.csi.len() != layout.count {
        return Err(Error::LengthMismatch {
            expected: layout.count,
            found: chain.csi.len(),
        });
    }
    let Some((lo, hi)) = layout.dc_gap()? else {
        return Ok(chain.clone());
    };
    let below_avail = (lo - layout.index_min) as usize;
    let above_avail = (layout.index_max - hi) as usize;
    if context < 2 || below_avail.min(above_avail) < context {
        return Err(Error::InsufficientContext {
            needed: context.max(2),
            found: below_avail.min(above_avail),
        });
    }

    let csi = &chain.csi;
    let below_k: Vec<i32> = (lo - context as i32..lo).collect();
    let above_k: Vec<i32> = (hi + 1..=hi + context as i32).collect();
    let phase_at = |k: i32| csi[position(layout, k)].arg();

    let below_phase = unwrap_phase(&below_k.iter().map(|&k| phase_at(k)).collect::<Vec<_>>());
    let below_x: Vec<f64> = below_k.iter().map(|&k| k as f64).collect();
    let below_fit = fit_line(&below_x, &below_phase).expect("context >= 2");

    // Anchor the first subcarrier above the gap on the extrapolated branch,
    // then unwrap the rest of the upper context from there.
    let anchor = nearest_branch(phase_at(hi + 1), below_fit.at((hi + 1) as f64));
    let mut above_phase = unwrap_phase(&above_k.iter().map(|&k| phase_at(k)).collect::<Vec<_>>());
    let shift = anchor - above_phase[0];
    above_phase.iter_mut().for_each(|p| *p += shift);

    let xs: Vec<f64> = below_k.iter().chain(&above_k).map(|&k| k as f64).collect();
    let ys: Vec<f64> = below_phase.iter().chain(&above_phase).copied().collect();
    let fit = fit_line(&xs, &ys).expect("two-sided context");

    let left = csi[position(layout, lo - 1)].norm();
    let right = csi[position(layout, hi + 1)].norm();
    let span = (hi + 1 - (lo - 1)) as f64;

    let mut out = chain.clone();
    for k in lo..=hi {
        let frac = (k - (lo - 1)) as f64 / span;
        let mag = left + (right - left) * frac;
        out.csi[position(layout, k)] = Complex64::from_polar(mag, fit.at(k as f64));
    }
    Ok(out)
}

/// Interpolates isolated pilot runs in magnitude and phase from their
/// immediate neighbours. Runs touching the grid edge are left unchanged.
pub fn interpolate_pilots(chain: &ChainRecord, layout: &SubcarrierLayout) -> Result<ChainRecord> {
    if chain.csi.len() != layout.count {
        return Err(Error::LengthMismatch {
            expected: layout.count,
            found: chain.csi.len(),
        });
    }
    let mut out = chain.clone();
    for (a, b) in contiguous_runs(&layout.pilot_indices) {
        if a - 2 < layout.index_min || b + 1 > layout.index_max {
            continue;
        }
        let h = |k: i32| chain.csi[position(layout, k)];
        let left = h(a - 1);
        let right = h(b + 1);
        // Local slope from the two subcarriers left of the run picks the
        // branch of the right neighbour.
        let slope = wrap_to_pi(left.arg() - h(a - 2).arg());
        let gap = (b + 1 - (a - 1)) as f64;
        let right_phase = nearest_branch(right.arg(), left.arg() + slope * gap);
        for k in a..=b {
            let frac = (k - (a - 1)) as f64 / gap;
            let mag = left.norm() + (right.norm() - left.norm()) * frac;
            let ph = left.arg() + (right_phase - left.arg()) * frac;
            out.csi[position(layout, k)] = Complex64::from_polar(mag, ph);
        }
    }
    Ok(out)
}

/// Replaces notch magnitudes by linear interpolation between the subcarriers
/// bordering each notch run. Phases are kept.
pub fn repair_notches(chain: &ChainRecord, layout: &SubcarrierLayout) -> ChainRecord {
    let mut out = chain.clone();
    for (a, b) in contiguous_runs(&layout.notch_indices) {
        let left = (a > layout.index_min).then(|| chain.csi[position(layout, a - 1)].norm());
        let right = (b < layout.index_max).then(|| chain.csi[position(layout, b + 1)].norm());
        let (left, right) = match (left, right) {
            (Some(l), Some(r)) => (l, r),
            (Some(l), None) => (l, l),
            (None, Some(r)) => (r, r),
            (None, None) => continue,
        };
        let span = (b + 1 - (a - 1)) as f64;
        for k in a..=b {
            let frac = (k - (a - 1)) as f64 / span;
            let mag = left + (right - left) * frac;
            let h = &mut out.csi[position(layout, k)];
            let unit = if h.norm() > 0.0 {
                *h / h.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            *h = unit * mag;
        }
    }
    out
}

/// Per-subcarrier amplitude correction equalizing the time-averaged power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlatteningProfile {
    /// Linear amplitude gains; their geometric mean is 1.
    pub per_subcarrier_gain: Vec<f64>,
    pub frames_used: usize,
}

impl PowerFlatteningProfile {
    pub fn identity(count: usize) -> Self {
        PowerFlatteningProfile {
            per_subcarrier_gain: vec![1.0; count],
            frames_used: 0,
        }
    }

    pub fn apply(&self, chain: &ChainRecord) -> Result<ChainRecord> {
        if chain.csi.len() != self.per_subcarrier_gain.len() {
            return Err(Error::LengthMismatch {
                expected: self.per_subcarrier_gain.len(),
                found: chain.csi.len(),
            });
        }
        let csi = chain
            .csi
            .iter()
            .zip(&self.per_subcarrier_gain)
            .map(|(h, g)| h * g)
            .collect();
        Ok(ChainRecord::new(csi, chain.rss_dbm))
    }

    /// Gains expressed as power corrections in dB.
    pub fn gain_db(&self) -> Vec<f64> {
        self.per_subcarrier_gain
            .iter()
            .map(|g| 20.0 * g.log10())
            .collect()
    }
}

/// Streaming accumulator of per-subcarrier power, for estimating a
/// [`PowerFlatteningProfile`] without holding frames in memory.
#[derive(Debug, Clone)]
pub struct FlatteningAccumulator {
    power_sum: Vec<f64>,
    frames: usize,
}

impl FlatteningAccumulator {
    pub fn new(count: usize) -> Self {
        FlatteningAccumulator {
            power_sum: vec![0.0; count],
            frames: 0,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn add(&mut self, chain: &ChainRecord) -> Result<()> {
        if chain.csi.len() != self.power_sum.len() {
            return Err(Error::LengthMismatch {
                expected: self.power_sum.len(),
                found: chain.csi.len(),
            });
        }
        for (acc, h) in self.power_sum.iter_mut().zip(&chain.csi) {
            *acc += h.norm_sqr();
        }
        self.frames += 1;
        Ok(())
    }

    /// `layout` is only used to report which subcarrier had zero power.
    pub fn finish(&self, layout: &SubcarrierLayout) -> Result<PowerFlatteningProfile> {
        if self.frames < 2 {
            return Err(Error::EmptyCapture {
                needed: 2,
                found: self.frames,
            });
        }
        let n = self.frames as f64;
        let mean: Vec<f64> = self.power_sum.iter().map(|s| s / n).collect();
        if let Some(pos) = mean.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::ZeroPower {
                index: layout.index_min + pos as i32,
            });
        }
        let log_mean = mean.iter().map(|p| p.ln()).sum::<f64>() / mean.len() as f64;
        let per_subcarrier_gain = mean.iter().map(|p| (0.5 * (log_mean - p.ln())).exp()).collect();
        Ok(PowerFlatteningProfile {
            per_subcarrier_gain,
            frames_used: self.frames,
        })
    }
}

/// Estimates the flattening profile of one chain from a set of frames.
pub fn estimate_flattening(
    frames: &[CsiFrame],
    chain: usize,
    layout: &SubcarrierLayout,
) -> Result<PowerFlatteningProfile> {
    let mut acc = FlatteningAccumulator::new(layout.count);
    for frame in frames {
        acc.add(frame.chain(chain)?)?;
    }
    acc.finish(layout)
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Swap correction for an arbitrary pair of chains. Returns whether the pair
/// was swapped back. The first frame seeds the tracker and passes through.
pub fn fix_swap_pair(
    frame: &mut CsiFrame,
    a: usize,
    b: usize,
    state: &mut CalibrationState,
) -> Result<bool> {
    let mag_a = frame.chain(a)?.magnitudes();
    let mag_b = frame.chain(b)?.magnitudes();
    let swapped = match state.prev_magnitudes.as_ref() {
        Some([prev_a, prev_b]) if prev_a.len() == mag_a.len() && prev_b.len() == mag_b.len() => {
            let straight = sq_distance(&mag_a, prev_a) + sq_distance(&mag_b, prev_b);
            let crossed = sq_distance(&mag_b, prev_a) + sq_distance(&mag_a, prev_b);
            crossed < straight
        }
        _ => false,
    };
    if swapped {
        frame.chains.swap(a, b);
        state.prev_magnitudes = Some([mag_b, mag_a]);
    } else {
        state.prev_magnitudes = Some([mag_a, mag_b]);
    }
    Ok(swapped)
}

/// Swap correction for a two-chain frame.
pub fn detect_and_fix_swap(
    mut frame: CsiFrame,
    state: &mut CalibrationState,
) -> Result<(CsiFrame, bool)> {
    if frame.chains.len() != 2 {
        return Err(Error::ChainCount {
            expected: 2,
            found: frame.chains.len(),
        });
    }
    let swapped = fix_swap_pair(&mut frame, 0, 1, state)?;
    Ok((frame, swapped))
}

/// Scales the reference chain to the free-space path gain of the reference
/// distance, and the target chain by the same factor corrected for the RSS
/// difference between the two chains.
pub fn scale_to_reference(
    frame: &CsiFrame,
    params: &CalibrationParams,
    ref_chain: usize,
    target_chain: usize,
) -> Result<CsiFrame> {
    let reference = frame.chain(ref_chain)?;
    let target = frame.chain(target_chain)?;
    let rss_ref = reference.rss_dbm.ok_or(Error::MissingRss { chain: ref_chain })?;
    let rss_target = target.rss_dbm.ok_or(Error::MissingRss { chain: target_chain })?;
    let ref_power = reference.mean_power();
    if !(ref_power > 0.0) {
        return Err(Error::NoSignal);
    }
    let ref_scale = (params.free_space_gain() / ref_power).sqrt();
    let target_scale = ref_scale * 10f64.powf((rss_target - rss_ref) / 20.0);

    let mut out = frame.clone();
    for (idx, scale) in [(ref_chain, ref_scale), (target_chain, target_scale)] {
        out.chains[idx].csi.iter_mut().for_each(|h| *h *= scale);
    }
    Ok(out)
}
