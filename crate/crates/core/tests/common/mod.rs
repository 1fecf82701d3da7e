//! Invariant checks shared by the property tests and the acceptance run.
//! Oracles here are written out directly rather than calling the library's
//! own helpers.

#![allow(dead_code)]

use std::f64::consts::PI;

use delaysync::analysis::{delay_cdf, phase_slope_delay, resolution_s, unwrapped_phase_spectrum};
use delaysync::calibrate::first_signal;
use delaysync::{Sounder, SubcarrierLayout, WindowKind};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub fn layout() -> SubcarrierLayout {
    SubcarrierLayout::he160()
}

pub fn tap_csi(layout: &SubcarrierLayout, taps: &[(f64, Complex64)]) -> Vec<Complex64> {
    layout
        .indices()
        .map(|k| {
            let f = k as f64 * layout.spacing_hz;
            taps.iter()
                .map(|&(tau, a)| a * Complex64::from_polar(1.0, -2.0 * PI * f * tau))
                .sum()
        })
        .collect()
}

pub fn random_csi(count: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), count)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

pub fn window_for(blackman: bool) -> WindowKind {
    if blackman {
        WindowKind::Blackman
    } else {
        WindowKind::Rectangular
    }
}

/// `0.42 − 0.5 cos(2πi/(N−1)) + 0.08 cos(4πi/(N−1))`, scaled by `N / Σw`.
pub fn compensated_blackman(n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / (n - 1) as f64;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect();
    let g = n as f64 / w.iter().sum::<f64>();
    w.into_iter().map(|v| v * g).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Σ|h|² = (κ / N) Σ|w·X|², N the un-oversampled grid length (2048).
pub fn parseval(csi: &[Complex64], kappa: usize, blackman: bool) -> Check {
    let l = layout();
    let ir = Sounder::new(&l, kappa, window_for(blackman))
        .unwrap()
        .impulse_response(csi)
        .unwrap();
    let w = if blackman {
        compensated_blackman(l.count)
    } else {
        vec![1.0; l.count]
    };
    let freq: f64 = csi.iter().zip(&w).map(|(x, g)| (x * g).norm_sqr()).sum();
    let expected = kappa as f64 / 2048.0 * freq;
    let time: f64 = ir.taps.iter().map(|t| t.norm_sqr()).sum();
    prop_assert!(rel_err(time, expected) < 1e-9, "{time} vs {expected}");
    Ok(())
}

pub fn linearity(x: &[Complex64], y: &[Complex64], a: Complex64, b: Complex64) -> Check {
    let s = Sounder::new(&layout(), 8, WindowKind::Blackman).unwrap();
    let mix: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
    let hx = s.impulse_response(x).unwrap();
    let hy = s.impulse_response(y).unwrap();
    let hm = s.impulse_response(&mix).unwrap();
    let scale = hm.taps.iter().map(|t| t.norm()).fold(1.0, f64::max);
    for i in 0..hm.len() {
        let expect = a * hx.taps[i] + b * hy.taps[i];
        prop_assert!((hm.taps[i] - expect).norm() < 1e-9 * scale, "bin {i}");
    }
    Ok(())
}

/// A single tap at an arbitrary delay peaks within half a bin of it.
pub fn delay_shift(tau: f64, phase: f64, kappa: usize, blackman: bool) -> Check {
    let l = layout();
    let s = Sounder::new(&l, kappa, window_for(blackman)).unwrap();
    let ir = s
        .impulse_response(&tap_csi(&l, &[(tau, Complex64::from_polar(1.0, phase))]))
        .unwrap();
    let peak = ir
        .taps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .unwrap()
        .0;
    let n = ir.len() as f64;
    let exact = tau / s.delay_bin_s();
    let diff = (peak as f64 - exact).rem_euclid(n);
    prop_assert!(diff.min(n - diff) <= 0.5 + 1e-9, "peak {peak}, exact {exact}");
    Ok(())
}

/// Phase-slope and first-signal delays of a single dominant path agree
/// within one resolution bin.
pub fn phase_slope_vs_first_signal(
    tau: f64,
    phase: f64,
    echo_delay: f64,
    echo_db: f64,
    echo_phase: f64,
) -> Check {
    let l = layout();
    let csi = tap_csi(
        &l,
        &[
            (tau, Complex64::from_polar(1.0, phase)),
            (tau + echo_delay, Complex64::from_polar(10f64.powf(echo_db / 20.0), echo_phase)),
        ],
    );
    let slope = phase_slope_delay(&unwrapped_phase_spectrum(&csi), l.spacing_hz).unwrap();
    let ir = Sounder::new(&l, 8, WindowKind::Blackman)
        .unwrap()
        .impulse_response(&csi)
        .unwrap();
    let fs = first_signal(&ir, -15.0).unwrap();
    prop_assert!(
        (slope - fs.delay_s).abs() <= resolution_s(&l),
        "{slope} vs {}",
        fs.delay_s
    );
    Ok(())
}

pub fn cdf_monotone(samples: &[f64]) -> Check {
    let cdf = delay_cdf(samples).unwrap();
    prop_assert!(cdf
        .windows(2)
        .all(|w| w[0].delay_s < w[1].delay_s && w[0].prob < w[1].prob));
    prop_assert!(cdf[0].prob > 0.0);
    prop_assert!((cdf.last().unwrap().prob - 1.0).abs() < 1e-12);
    for p in &cdf {
        let below = samples.iter().filter(|&&s| s <= p.delay_s).count() as f64 / samples.len() as f64;
        prop_assert!((p.prob - below).abs() < 1e-12);
    }
    Ok(())
}
