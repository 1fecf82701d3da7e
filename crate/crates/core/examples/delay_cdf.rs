//! Empirical CDF of the uncalibrated first-signal delay and its distance from
//! the uniform distribution the offsets were drawn from.
//!
//! ```bash
//! cargo run --release --example delay_cdf
//! ```

use delaysync::analysis::{delay_cdf, ks_statistic_uniform};
use delaysync::pipeline::{Pipeline, PipelineOptions};
use delaysync::synth::{corridor_scenario, generate_capture};

fn main() -> delaysync::Result<()> {
    let mut cfg = corridor_scenario();
    cfg.frame_count = 1000;
    let mut pipeline = Pipeline::new(
        &cfg.layout,
        &cfg.params,
        PipelineOptions {
            ma_window: Some(1),
            flatten: false,
            ..PipelineOptions::default()
        },
    )?;
    let mut tau = Vec::new();
    for (i, (frame, _)) in generate_capture(&cfg, 9)?.enumerate() {
        if let Some(out) = pipeline.process(i, frame)?.output {
            tau.push(out.pair.tau_star_s);
        }
    }
    let cdf = delay_cdf(&tau)?;
    for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        let p = cdf.iter().find(|p| p.prob >= q).unwrap_or(cdf.last().unwrap());
        println!("P <= {:.2} at {:7.2} ns", p.prob, p.delay_s * 1e9);
    }
    // The measured delay includes the reference path itself.
    let tau_ref = cfg.params.tau_ref_s();
    let (lo, hi) = cfg.timing_offset_range_s;
    let ks = ks_statistic_uniform(&tau, lo + tau_ref, hi + tau_ref)?;
    println!("KS distance to U[{:.0}, {:.0}] ns: {ks:.4}", (lo + tau_ref) * 1e9, (hi + tau_ref) * 1e9);
    Ok(())
}
