//! Full pipeline on the synthetic corridor: calibration, 11-frame moving
//! average, peak tracks and the furthest path at the first frame.
//!
//! ```bash
//! cargo run --release --example corridor
//! ```

use delaysync::pipeline::run_frames;
use delaysync::synth::{corridor_scenario, generate_capture};
use delaysync::PipelineOptions;

fn main() -> delaysync::Result<()> {
    let cfg = corridor_scenario();
    let frames: Vec<_> = generate_capture(&cfg, 1)?.map(|(f, _)| f).collect();
    let run = run_frames(&cfg.layout, &cfg.params, &frames, PipelineOptions::default())?;
    let b = &run.bundle;

    println!(
        "{} frames, kappa {}, {} window, moving average {}",
        b.counts.frames_calibrated, b.config.kappa, b.config.window, b.config.ma_window
    );
    println!(
        "noise floor {:.1} dB per frame, {:.1} dB averaged",
        b.noise_floor.calibrated_db.unwrap_or(f64::NEG_INFINITY),
        b.noise_floor.averaged_db.unwrap_or(f64::NEG_INFINITY)
    );
    for (i, t) in b.tracks.iter().enumerate() {
        let p = t.first();
        println!(
            "track {i}: {:7.2} ns at frame {} ({:6.1} dB), {:7.2} ns at frame {}, {:+.3} ns/frame",
            p.delay_s * 1e9,
            p.frame,
            p.power_db,
            t.last().delay_s * 1e9,
            t.last().frame,
            t.slope_s_per_frame().unwrap_or(0.0) * 1e9
        );
    }
    if let Some(d) = b.max_path_distance_m {
        println!("longest path at frame 0: {d:.1} m");
    }
    Ok(())
}
