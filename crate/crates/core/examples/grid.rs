//! Subcarrier grid and delay-domain resolution for a few oversampling factors.
//!
//! ```bash
//! cargo run --example grid
//! ```

use delaysync::analysis::resolution_s;
use delaysync::{Sounder, SubcarrierLayout, WindowKind};

fn main() -> delaysync::Result<()> {
    let layout = SubcarrierLayout::he160();
    println!(
        "{} subcarriers {}..={} at {} kHz, occupied bandwidth {:.3} MHz",
        layout.count,
        layout.index_min,
        layout.index_max,
        layout.spacing_hz / 1e3,
        layout.bandwidth_hz() / 1e6
    );
    println!("DC gap {:?}, notches {:?}", layout.dc_gap()?, layout.notch_indices);
    println!(
        "delay span {:.1} us, resolution 1/B {:.3} ns",
        layout.delay_span_s() * 1e6,
        resolution_s(&layout) * 1e9
    );
    for kappa in [1, 2, 4, 8, 16] {
        let s = Sounder::new(&layout, kappa, WindowKind::Blackman)?;
        println!(
            "kappa {kappa:2}: {:6} taps, bin {:.5} ns",
            s.fft_len(),
            s.delay_bin_s() * 1e9
        );
    }
    Ok(())
}
