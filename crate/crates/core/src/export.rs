//! Result exports: an impulse-response matrix for heatmaps, per-tap CSV,
//! the JSON summary and a PNG heatmap.
//!
//! Matrix layout, little-endian:
//!
//! ```text
//! magic          8 bytes  "DSYNCIRM"
//! version        u32      1
//! bins           u32      taps per row
//! delay_bin_s    f64
//! rows, repeated:
//!   frame_index    u64
//!   timestamp_ns   u64
//!   delay_origin_s f64
//!   taps           bins × (f32 re, f32 im)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pipeline::{ResultBundle, SeriesFrame};
use crate::types::ImpulseResponse;

pub const MATRIX_MAGIC: &[u8; 8] = b"DSYNCIRM";
pub const MATRIX_VERSION: u32 = 1;

/// One row of an impulse-response matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub frame_index: u64,
    pub timestamp_ns: u64,
    pub ir: ImpulseResponse,
}

impl From<&SeriesFrame> for MatrixRow {
    fn from(s: &SeriesFrame) -> Self {
        MatrixRow {
            frame_index: s.frame_index as u64,
            timestamp_ns: s.timestamp_ns,
            ir: s.ir.clone(),
        }
    }
}

pub struct MatrixWriter<W: Write> {
    out: W,
    bins: usize,
    delay_bin_s: f64,
    buf: Vec<u8>,
}

impl MatrixWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, bins: usize, delay_bin_s: f64) -> Result<Self> {
        MatrixWriter::new(BufWriter::new(File::create(path)?), bins, delay_bin_s)
    }
}

impl<W: Write> MatrixWriter<W> {
    pub fn new(mut out: W, bins: usize, delay_bin_s: f64) -> Result<Self> {
        let bins_u32 =
            u32::try_from(bins).map_err(|_| Error::InvalidConfig("too many delay bins".into()))?;
        out.write_all(MATRIX_MAGIC)?;
        out.write_all(&MATRIX_VERSION.to_le_bytes())?;
        out.write_all(&bins_u32.to_le_bytes())?;
        out.write_all(&delay_bin_s.to_le_bytes())?;
        Ok(MatrixWriter {
            out,
            bins,
            delay_bin_s,
            buf: Vec::with_capacity(24 + bins * 8),
        })
    }

    pub fn write_row(&mut self, frame_index: u64, timestamp_ns: u64, ir: &ImpulseResponse) -> Result<()> {
        if ir.len() != self.bins {
            return Err(Error::LengthMismatch {
                expected: self.bins,
                found: ir.len(),
            });
        }
        if ir.delay_bin_s != self.delay_bin_s {
            return Err(Error::InvalidConfig("row delay bin differs from matrix".into()));
        }
        self.buf.clear();
        self.buf.extend_from_slice(&frame_index.to_le_bytes());
        self.buf.extend_from_slice(&timestamp_ns.to_le_bytes());
        self.buf.extend_from_slice(&ir.delay_origin_s.to_le_bytes());
        for t in &ir.taps {
            self.buf.extend_from_slice(&(t.re as f32).to_le_bytes());
            self.buf.extend_from_slice(&(t.im as f32).to_le_bytes());
        }
        self.out.write_all(&self.buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a whole matrix file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Vec<MatrixRow>> {
    read_matrix_from(BufReader::new(File::open(path)?))
}

pub fn read_matrix_from(mut input: impl Read) -> Result<Vec<MatrixRow>> {
    let mut head = [0u8; 24];
    input.read_exact(&mut head).map_err(|_| Error::BadMagic)?;
    if &head[..8] != MATRIX_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let bins = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let delay_bin_s = f64::from_le_bytes(head[16..24].try_into().unwrap());
    let row_len = 24 + bins * 8;
    let mut rows = Vec::new();
    let mut buf = vec![0u8; row_len];
    loop {
        match input.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as f64;
        let taps = (0..bins)
            .map(|i| Complex64::new(f32_at(24 + 8 * i), f32_at(28 + 8 * i)))
            .collect();
        rows.push(MatrixRow {
            frame_index: u64_at(0),
            timestamp_ns: u64_at(8),
            ir: ImpulseResponse {
                taps,
                delay_bin_s,
                delay_origin_s: f64::from_le_bytes(buf[16..24].try_into().unwrap()),
            },
        });
    }
    Ok(rows)
}

/// Delay range selected for CSV and heatmap exports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRange {
    pub min_s: f64,
    pub max_s: f64,
}

impl DelayRange {
    pub fn all() -> Self {
        DelayRange {
            min_s: f64::NEG_INFINITY,
            max_s: f64::INFINITY,
        }
    }

    fn bins<'a>(&self, ir: &'a ImpulseResponse) -> impl Iterator<Item = usize> + 'a {
        let (lo, hi) = (self.min_s, self.max_s);
        (0..ir.len()).filter(move |&i| {
            let d = ir.delay_of(i);
            d >= lo && d <= hi
        })
    }
}

/// Writes `frame,delay_ns,mag_db,phase_rad` rows for the taps in `range`.
pub fn write_ir_csv<'a>(
    mut out: impl Write,
    rows: impl IntoIterator<Item = &'a MatrixRow>,
    range: DelayRange,
) -> Result<()> {
    writeln!(out, "frame,delay_ns,mag_db,phase_rad")?;
    for row in rows {
        for i in range.bins(&row.ir) {
            let t = row.ir.taps[i];
            writeln!(
                out,
                "{},{:.4},{:.3},{:.6}",
                row.frame_index,
                row.ir.delay_of(i) * 1e9,
                10.0 * t.norm_sqr().log10(),
                t.arg()
            )?;
        }
    }
    Ok(())
}

pub fn write_summary(path: impl AsRef<Path>, bundle: &ResultBundle) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, bundle)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Maps `x ∈ [0, 1]` onto a blue–cyan–yellow–red ramp.
fn colormap(x: f64) -> [u8; 3] {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [0.0, 0.0, 0.2]),
        (0.3, [0.0, 0.3, 0.9]),
        (0.55, [0.0, 0.9, 0.9]),
        (0.8, [1.0, 0.9, 0.0]),
        (1.0, [0.9, 0.0, 0.0]),
    ];
    let x = x.clamp(0.0, 1.0);
    let hi = STOPS.iter().position(|s| s.0 >= x).unwrap_or(STOPS.len() - 1).max(1);
    let (x0, c0) = STOPS[hi - 1];
    let (x1, c1) = STOPS[hi];
    let f = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    let mut rgb = [0u8; 3];
    for (k, v) in rgb.iter_mut().enumerate() {
        *v = ((c0[k] + (c1[k] - c0[k]) * f) * 255.0).round() as u8;
    }
    rgb
}

/// Renders a delay × time heatmap: one pixel row per matrix row, one pixel
/// column per delay bin in `range`, colour scaled over `[max − dynamic_range_db, max]`.
pub fn write_heatmap_png(
    path: impl AsRef<Path>,
    rows: &[MatrixRow],
    range: DelayRange,
    dynamic_range_db: f64,
) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(Error::EmptyInput);
    };
    let width = range.bins(&first.ir).count();
    if width == 0 {
        return Err(Error::InvalidConfig("delay range selects no bins".into()));
    }
    let db: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v: Vec<f64> = range
                .bins(&r.ir)
                .map(|i| 10.0 * r.ir.taps[i].norm_sqr().log10())
                .collect();
            v.resize(width, f64::NEG_INFINITY);
            v
        })
        .collect();
    let max = db
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = max - dynamic_range_db;
    let mut data = Vec::with_capacity(width * rows.len() * 3);
    for row in &db {
        for &v in row {
            let x = if v.is_finite() { (v - floor) / dynamic_range_db } else { 0.0 };
            data.extend_from_slice(&colormap(x));
        }
    }
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, width as u32, rows.len() as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(io::Error::other)?;
    writer.write_image_data(&data).map_err(io::Error::other)?;
    writer.finish().map_err(io::Error::other)?;
    Ok(())
}
