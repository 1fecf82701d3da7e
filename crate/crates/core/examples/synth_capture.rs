//! Writes a synthetic two-chain capture and prints its ground truth.
//!
//! ```bash
//! cargo run --example synth_capture -- corridor /tmp/corridor.csi
//! ```

use std::env;

use delaysync::capture::{read_capture, CaptureHeader, CaptureWriter};
use delaysync::synth::{generate_capture, preset};

fn main() -> delaysync::Result<()> {
    let mut args = env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "corridor".into());
    let path = args
        .next()
        .unwrap_or_else(|| env::temp_dir().join(format!("{name}.csi")).display().to_string());

    let mut cfg = preset(&name)?;
    cfg.frame_count = 50;
    let mut header = CaptureHeader::new(cfg.layout.clone(), cfg.params.clone(), 2);
    header.metadata.insert("scenario".into(), name.clone().into());
    let mut writer = CaptureWriter::create(&path, header)?;
    for (frame, truth) in generate_capture(&cfg, 1)? {
        writer.write_frame(&frame)?;
        if truth.frame_index % 10 == 0 {
            let delays: Vec<String> = truth
                .target_delays_s
                .iter()
                .map(|d| format!("{:.3}", d * 1e9))
                .collect();
            println!(
                "frame {:3}: t={:>12} ns offset {:7.2} ns phase {:5.2} target [{}] ns",
                truth.frame_index,
                truth.timestamp_ns,
                truth.timing_offset_s * 1e9,
                truth.global_phase_rad,
                delays.join(", ")
            );
        }
    }
    writer.finish()?;

    let capture = read_capture(&path)?;
    println!(
        "{path}: {} frames, {} bytes per record",
        capture.frames.len(),
        capture.header.record_len()
    );
    Ok(())
}
