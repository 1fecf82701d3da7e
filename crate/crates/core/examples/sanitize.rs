//! CSI sanitation on synthetic frames: DC-gap interpolation, notch repair
//! and power flattening.
//!
//! ```bash
//! cargo run --example sanitize
//! ```

use delaysync::preprocess::{interpolate_dc_gap, repair_notches, FlatteningAccumulator, DC_CONTEXT};
use delaysync::synth::{generate_frame, static_scenario};
use num_complex::Complex64;

fn max_error(a: &[Complex64], b: &[Complex64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| (a[i] - b[i]).norm()).fold(0.0, f64::max)
}

fn mean_mag(c: &[Complex64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| c[i].norm()).sum::<f64>() / idx.len() as f64
}

fn main() -> delaysync::Result<()> {
    // Observed frame (DC blanked, notches 20 dB down) next to the clean one.
    let mut cfg = static_scenario();
    cfg.snr_db = None;
    cfg.impairments.notch_attenuation_db = 20.0;
    let mut clean_cfg = cfg.clone();
    clean_cfg.impairments.blank_dc = false;
    clean_cfg.impairments.notch_attenuation_db = 0.0;
    let (observed, _) = generate_frame(&cfg, 0, 7)?;
    let (clean, _) = generate_frame(&clean_cfg, 0, 7)?;

    let layout = &cfg.layout;
    let dc: Vec<usize> = layout.dc_indices.iter().filter_map(|&k| layout.position(k)).collect();
    let notch: Vec<usize> = layout.notch_indices.iter().filter_map(|&k| layout.position(k)).collect();
    for (name, (seen, truth)) in ["reference", "target"]
        .iter()
        .zip(observed.chains.iter().zip(&clean.chains))
    {
        let filled = interpolate_dc_gap(seen, layout, DC_CONTEXT)?;
        let repaired = repair_notches(&filled, layout);
        println!(
            "{name:>9}: DC gap max |error| {:.3} -> {:.3}, notch magnitude {:.3} -> {:.3} (clean {:.3})",
            max_error(&seen.csi, &truth.csi, &dc),
            max_error(&filled.csi, &truth.csi, &dc),
            mean_mag(&seen.csi, &notch),
            mean_mag(&repaired.csi, &notch),
            mean_mag(&truth.csi, &notch)
        );
    }

    // Flattening a 4 dB band-edge roll-off from a short run of frames.
    cfg.impairments.edge_rolloff_db = 4.0;
    cfg.snr_db = Some(30.0);
    let mut acc = FlatteningAccumulator::new(layout.count);
    for i in 0..50 {
        let (f, _) = generate_frame(&cfg, i, 7)?;
        let c = interpolate_dc_gap(&f.chains[0], layout, DC_CONTEXT)?;
        acc.add(&repair_notches(&c, layout))?;
    }
    let profile = acc.finish(layout)?;
    let g = profile.gain_db();
    println!(
        "flattening over {} frames: gain {:+.2} dB at the band edge, {:+.2} dB near DC",
        profile.frames_used,
        g[0],
        g[layout.count / 2 + 20]
    );
    Ok(())
}
