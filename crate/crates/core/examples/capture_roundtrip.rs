//! Capture format: write, read, re-write, and what the reader does with a
//! truncated tail or a record of the wrong size.
//!
//! ```bash
//! cargo run --example capture_roundtrip
//! ```

use std::io::Cursor;

use delaysync::capture::{read_capture_from, CaptureHeader, CaptureReader, CaptureWriter};
use delaysync::synth::{generate_capture, static_scenario};
use delaysync::SubcarrierLayout;

fn write(header: &CaptureHeader, frames: &[delaysync::CsiFrame]) -> delaysync::Result<Vec<u8>> {
    let mut w = CaptureWriter::new(Vec::new(), header.clone())?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()
}

fn main() -> delaysync::Result<()> {
    let mut cfg = static_scenario();
    cfg.frame_count = 20;
    let frames: Vec<_> = generate_capture(&cfg, 3)?.map(|(f, _)| f).collect();
    let header = CaptureHeader::new(cfg.layout.clone(), cfg.params.clone(), 2);

    let bytes = write(&header, &frames)?;
    let back = read_capture_from(CaptureReader::new(Cursor::new(&bytes))?)?;
    let again = write(&back.header, &back.frames)?;
    println!(
        "{} bytes, {} frames read back, re-written bytes identical: {}",
        bytes.len(),
        back.frames.len(),
        bytes == again
    );

    let cut = &bytes[..bytes.len() - 100];
    let truncated = read_capture_from(CaptureReader::new(Cursor::new(cut))?)?;
    println!(
        "truncated tail: {} frames, {} warning(s)",
        truncated.frames.len(),
        truncated.warnings
    );

    // A header claiming one subcarrier fewer than the records carry.
    let mut small = cfg.layout.clone();
    small.index_max -= 1;
    small.count -= 1;
    let small = SubcarrierLayout::new(
        small.spacing_hz,
        small.index_min,
        small.index_max,
        small.dc_indices,
        small.notch_indices,
        Vec::new(),
    )?;
    let mut forged = write(&CaptureHeader::new(small, cfg.params.clone(), 2), &[])?;
    forged.extend_from_slice(&bytes[write(&header, &[])?.len()..]);
    match read_capture_from(CaptureReader::new(Cursor::new(forged))?) {
        Ok(c) => println!("mismatched record size unexpectedly read {} frames", c.frames.len()),
        Err(e) => println!("mismatched record size: {e}"),
    }
    Ok(())
}
