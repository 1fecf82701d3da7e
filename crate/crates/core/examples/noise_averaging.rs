//! Noise floor of calibrated responses before and after the moving average.
//!
//! ```bash
//! cargo run --release --example noise_averaging
//! ```

use delaysync::analysis::noise_floor_db;
use delaysync::calibrate::moving_average;
use delaysync::types::ImpulseResponse;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> delaysync::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 16384;
    let series: Vec<ImpulseResponse> = (0..41)
        .map(|_| ImpulseResponse {
            taps: (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * 1e-6
                })
                .collect(),
            delay_bin_s: 0.78125e-9,
            delay_origin_s: 0.0,
        })
        .collect();
    let raw = noise_floor_db(&series[20], &[])?;
    for w in [1, 3, 5, 11, 21] {
        let avg = moving_average(&series, w)?;
        let floor = noise_floor_db(&avg[20], &[])?;
        println!(
            "window {w:2}: floor {floor:7.2} dB, drop {:5.2} dB (10log10 w = {:5.2})",
            raw - floor,
            10.0 * (w as f64).log10()
        );
    }
    Ok(())
}
