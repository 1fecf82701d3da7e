//! Unwrapped CSI phase of the reference and target chains. For the
//! single-path reference the phase slope matches the first-signal delay; the
//! target's later paths pull its slope past its first arrival.
//!
//! ```bash
//! cargo run --example phase_slope
//! ```

use delaysync::analysis::{phase_slope_delay, resolution_s, unwrapped_phase_spectrum};
use delaysync::calibrate::first_signal;
use delaysync::preprocess::{interpolate_dc_gap, DC_CONTEXT};
use delaysync::synth::{generate_frame, static_scenario};
use delaysync::{Sounder, WindowKind};

fn main() -> delaysync::Result<()> {
    let mut cfg = static_scenario();
    cfg.timing_offset_range_s = (200e-9, 200e-9);
    let (frame, _) = generate_frame(&cfg, 0, 4)?;
    let sounder = Sounder::new(&cfg.layout, 8, WindowKind::Blackman)?;
    println!("resolution {:.2} ns", resolution_s(&cfg.layout) * 1e9);
    for (name, chain) in ["reference", "target"].iter().zip(&frame.chains) {
        let chain = interpolate_dc_gap(chain, &cfg.layout, DC_CONTEXT)?;
        let phase = unwrapped_phase_spectrum(&chain.csi);
        let slope_delay = phase_slope_delay(&phase, cfg.layout.spacing_hz).unwrap_or(f64::NAN);
        let fs = first_signal(&sounder.impulse_response(&chain.csi)?, -15.0)?;
        println!(
            "{name:>9}: phase {:8.1} .. {:8.1} rad, slope delay {:7.2} ns, first signal {:7.2} ns",
            phase[0],
            phase[phase.len() - 1],
            slope_delay * 1e9,
            fs.delay_s * 1e9
        );
    }
    Ok(())
}
