//! Chain swaps and π phase flips injected at 5 % each, then undone by the
//! pipeline's trackers.
//!
//! ```bash
//! cargo run --release --example fault_repair
//! ```

use delaysync::pipeline::run_frames;
use delaysync::synth::{generate_capture, static_scenario};
use delaysync::PipelineOptions;

fn main() -> delaysync::Result<()> {
    let mut cfg = static_scenario();
    cfg.frame_count = 400;
    cfg.faults.swap_prob = 0.05;
    cfg.faults.pi_shift_prob = 0.05;
    let (frames, truth): (Vec<_>, Vec<_>) = generate_capture(&cfg, 5)?.unzip();

    let options = PipelineOptions {
        ma_window: Some(1),
        ..PipelineOptions::default()
    };
    let run = run_frames(&cfg.layout, &cfg.params, &frames, options)?;
    let injected_swaps: Vec<usize> = truth.iter().filter(|t| t.swapped).map(|t| t.frame_index).collect();
    let injected_flips: Vec<usize> = truth.iter().filter(|t| t.pi_shifted).map(|t| t.frame_index).collect();
    println!("swaps injected {:?}", injected_swaps);
    println!("swaps fixed    {:?}", run.bundle.swapped_frames);
    println!("flips injected {:?}", injected_flips);
    println!("flips fixed    {:?}", run.bundle.pi_flipped_frames);
    Ok(())
}
