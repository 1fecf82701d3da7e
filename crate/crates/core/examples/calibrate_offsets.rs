//! Removes random timing offsets and global phases from a static channel.
//! Before calibration the reference first signal wanders over the cyclic
//! prefix; afterwards it sits at `d_ref / c` with zero phase.
//!
//! ```bash
//! cargo run --release --example calibrate_offsets
//! ```

use delaysync::calibrate::{calibrate_pair, first_signal};
use delaysync::preprocess::{interpolate_dc_gap, DC_CONTEXT};
use delaysync::synth::{generate_frame, static_scenario};
use delaysync::{Sounder, WindowKind};

fn main() -> delaysync::Result<()> {
    let cfg = static_scenario();
    let params = &cfg.params;
    let sounder = Sounder::new(&cfg.layout, 8, WindowKind::Blackman)?;
    let tau_ref = params.tau_ref_s();
    println!("tau_ref {:.4} ns, bin {:.5} ns", tau_ref * 1e9, sounder.delay_bin_s() * 1e9);
    println!("frame  offset_ns  tau*_ns   ref_after_ns  ref_phase  target_first_ns");
    for i in 0..10 {
        let (frame, truth) = generate_frame(&cfg, i, 42)?;
        let ir = |c: usize| -> delaysync::Result<_> {
            let chain = interpolate_dc_gap(&frame.chains[c], &cfg.layout, DC_CONTEXT)?;
            sounder.impulse_response(&chain.csi)
        };
        let pair = calibrate_pair(&ir(0)?, &ir(1)?, params)?;
        let r = first_signal(&pair.h_ref, params.first_peak_threshold_db)?;
        let t = first_signal(&pair.h_target, params.first_peak_threshold_db)?;
        println!(
            "{i:5}  {:9.2}  {:7.2}  {:12.4}  {:9.5}  {:15.2}",
            truth.timing_offset_s * 1e9,
            pair.tau_star_s * 1e9,
            r.delay_s * 1e9,
            r.phase_rad,
            t.delay_s * 1e9
        );
    }
    Ok(())
}
