//! Randomized invariants of the transform, calibration and statistics.

mod common;

use std::f64::consts::PI;

use common::*;
use delaysync::calibrate::{calibrate_pair, first_signal};
use delaysync::preprocess::repair_notches;
use delaysync::{CalibrationParams, ChainRecord, Sounder, WindowKind};
use num_complex::Complex64;
use proptest::prelude::*;

const CASES: u32 = 128;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn parseval_holds(csi in random_csi(2025), kappa in 1usize..=8, blackman in any::<bool>()) {
        parseval(&csi, kappa, blackman)?;
    }

    /// Spot-checks taps against the inverse DFT summed directly.
    #[test]
    fn matches_direct_inverse_dft(csi in random_csi(2025), bins in prop::collection::vec(0usize..16384, 4)) {
        let l = layout();
        let ir = Sounder::new(&l, 8, WindowKind::Rectangular).unwrap().impulse_response(&csi).unwrap();
        let n_total = 16384.0;
        for b in bins {
            let direct: Complex64 = l
                .indices()
                .zip(&csi)
                .map(|(k, x)| x * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * b as f64 / n_total))
                .sum::<Complex64>()
                / 2048.0;
            prop_assert!((ir.taps[b] - direct).norm() < 1e-9 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn idft_is_linear(
        x in random_csi(2025),
        y in random_csi(2025),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        linearity(&x, &y, Complex64::new(a.0, a.1), Complex64::new(b.0, b.1))?;
    }

    /// A delay of m bins multiplies the CSI by a phase ramp and circularly
    /// shifts the response by m bins.
    #[test]
    fn integer_delay_shift(csi in random_csi(2025), m in 0usize..16384) {
        let l = layout();
        let s = Sounder::new(&l, 8, WindowKind::Blackman).unwrap();
        let d = m as f64 * s.delay_bin_s();
        let ramped: Vec<Complex64> = l
            .indices()
            .zip(&csi)
            .map(|(k, x)| x * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * l.spacing_hz * d))
            .collect();
        let h = s.impulse_response(&csi).unwrap();
        let hs = s.impulse_response(&ramped).unwrap();
        let n = h.len();
        for i in (0..n).step_by(37) {
            prop_assert!((hs.taps[(i + m) % n] - h.taps[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn single_tap_peak_within_half_bin(
        tau in 0.0f64..12.0e-6,
        phase in 0.0f64..(2.0 * PI),
        kappa in 1usize..=16,
        blackman in any::<bool>(),
    ) {
        delay_shift(tau, phase, kappa, blackman)?;
    }

    /// The κ = 1 response is every κ-th tap of the oversampled one.
    #[test]
    fn oversampling_consistency(csi in random_csi(2025), kappa in 2usize..=8) {
        let l = layout();
        let base = Sounder::new(&l, 1, WindowKind::Blackman).unwrap().impulse_response(&csi).unwrap();
        let over = Sounder::new(&l, kappa, WindowKind::Blackman).unwrap().impulse_response(&csi).unwrap();
        for (i, t) in base.taps.iter().enumerate() {
            prop_assert!((over.taps[i * kappa] - t).norm() < 1e-9);
        }
    }

    #[test]
    fn phase_slope_agrees_with_first_signal(
        tau in 0.0f64..3.0e-6,
        phase in 0.0f64..(2.0 * PI),
        echo_delay in 10e-9f64..500e-9,
        echo_db in -40.0f64..-20.0,
        echo_phase in 0.0f64..(2.0 * PI),
    ) {
        phase_slope_vs_first_signal(tau, phase, echo_delay, echo_db, echo_phase)?;
    }

    #[test]
    fn cdf_is_monotone(samples in prop::collection::vec(0.0f64..5e-6, 1..300)) {
        cdf_monotone(&samples)?;
    }

    /// Timing offset and global phase applied to both chains leave the
    /// calibrated target unchanged up to one delay bin.
    #[test]
    fn offset_and_phase_cancel(delta in 0.0f64..3.2e-6, psi in 0.0f64..(2.0 * PI)) {
        let l = layout();
        let params = CalibrationParams::default();
        let tau_ref = params.tau_ref_s();
        let s = Sounder::new(&l, 8, WindowKind::Blackman).unwrap();
        let target = [(30e-9, Complex64::new(0.5, 0.1)), (90e-9, Complex64::new(-0.2, 0.2))];
        let calibrated = |delta: f64, psi: f64| {
            let rot = Complex64::from_polar(1.0, psi);
            let r = tap_csi(&l, &[(tau_ref + delta, rot)]);
            let shifted: Vec<_> = target.iter().map(|&(d, a)| (d + delta, a * rot)).collect();
            let t = tap_csi(&l, &shifted);
            calibrate_pair(&s.impulse_response(&r).unwrap(), &s.impulse_response(&t).unwrap(), &params).unwrap()
        };
        let base = calibrated(0.0, 0.0);
        let moved = calibrated(delta, psi);
        let r = first_signal(&moved.h_ref, -15.0).unwrap();
        prop_assert!((r.delay_s - tau_ref).abs() < 1e-15);
        prop_assert!(r.phase_rad.abs() < 1e-9);
        let fb = first_signal(&base.h_target, -15.0).unwrap();
        let fm = first_signal(&moved.h_target, -15.0).unwrap();
        prop_assert!((fb.delay_s - fm.delay_s).abs() <= s.delay_bin_s() + 1e-15);
        prop_assert!((fm.delay_s - 30e-9).abs() <= s.delay_bin_s());
    }

    #[test]
    fn notch_repair_idempotent(csi in random_csi(2025)) {
        let l = layout();
        let chain = ChainRecord::new(csi, Some(-40.0));
        let once = repair_notches(&chain, &l);
        let twice = repair_notches(&once, &l);
        for (a, b) in once.csi.iter().zip(&twice.csi) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
