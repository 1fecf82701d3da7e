//! Binary CSI capture files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   "DSYNCCSI"
//! version      u32       1
//! header_len   u32       byte length of the JSON header
//! header       UTF-8 JSON (layout, params, chain count, metadata)
//! records      repeated, fixed size:
//!   timestamp  u64       nanoseconds since capture start
//!   per chain:
//!     rss      f32       dBm, NaN when not reported
//!     csi      count × (f32 re, f32 im), ascending subcarrier index
//! ```
//!
//! A trailing partial record is dropped and counted as a warning. Records
//! with non-increasing or implausible timestamps, or non-finite CSI, are
//! rejected as corrupt.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::SubcarrierLayout;
use crate::types::{CalibrationParams, ChainRecord, CsiFrame};

pub const MAGIC: &[u8; 8] = b"DSYNCCSI";
pub const FORMAT_VERSION: u32 = 1;

/// Largest timestamp step accepted between consecutive records (one hour).
pub const MAX_TIMESTAMP_GAP_NS: u64 = 3_600_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureHeader {
    pub layout: SubcarrierLayout,
    pub params: CalibrationParams,
    pub chains: usize,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl CaptureHeader {
    pub fn new(layout: SubcarrierLayout, params: CalibrationParams, chains: usize) -> Self {
        CaptureHeader {
            layout,
            params,
            chains,
            metadata: serde_json::Map::new(),
        }
    }

    pub fn record_len(&self) -> usize {
        8 + self.chains * (4 + self.layout.count * 8)
    }

    fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.chains < 2 {
            return Err(Error::ChainCount {
                expected: 2,
                found: self.chains,
            });
        }
        Ok(())
    }
}

pub struct CaptureWriter<W: Write> {
    out: W,
    header: CaptureHeader,
    buf: Vec<u8>,
}

impl CaptureWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: CaptureHeader) -> Result<Self> {
        CaptureWriter::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(mut out: W, header: CaptureHeader) -> Result<Self> {
        header.validate()?;
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len())
            .map_err(|_| Error::InvalidConfig("capture header too large".into()))?;
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(&json)?;
        let buf = Vec::with_capacity(header.record_len());
        Ok(CaptureWriter { out, header, buf })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    pub fn write_frame(&mut self, frame: &CsiFrame) -> Result<()> {
        if frame.chains.len() != self.header.chains {
            return Err(Error::ChainCount {
                expected: self.header.chains,
                found: frame.chains.len(),
            });
        }
        self.buf.clear();
        self.buf.extend_from_slice(&frame.timestamp_ns.to_le_bytes());
        for chain in &frame.chains {
            if chain.csi.len() != self.header.layout.count {
                return Err(Error::LengthMismatch {
                    expected: self.header.layout.count,
                    found: chain.csi.len(),
                });
            }
            let rss = chain.rss_dbm.map_or(f32::NAN, |r| r as f32);
            self.buf.extend_from_slice(&rss.to_le_bytes());
            for h in &chain.csi {
                self.buf.extend_from_slice(&(h.re as f32).to_le_bytes());
                self.buf.extend_from_slice(&(h.im as f32).to_le_bytes());
            }
        }
        self.out.write_all(&self.buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming record reader. Yields frames in file order.
pub struct CaptureReader<R: Read> {
    input: R,
    header: CaptureHeader,
    buf: Vec<u8>,
    index: usize,
    prev_ts: Option<u64>,
    warnings: usize,
    done: bool,
}

impl CaptureReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        CaptureReader::new(BufReader::new(File::open(path)?))
    }
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads until `buf` is full or EOF; returns the number of bytes read.
fn fill(input: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> CaptureReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        if fill(&mut input, &mut magic)? < magic.len() || &magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let len = read_u32(&mut input)? as usize;
        let mut json = vec![0u8; len];
        input.read_exact(&mut json)?;
        let header: CaptureHeader = serde_json::from_slice(&json)?;
        header.validate()?;
        let buf = vec![0u8; header.record_len()];
        Ok(CaptureReader {
            input,
            header,
            buf,
            index: 0,
            prev_ts: None,
            warnings: 0,
            done: false,
        })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    /// Number of tolerated defects so far (truncated trailing record).
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptRecord {
            index: self.index,
            reason: reason.into(),
        }
    }

    fn decode(&self) -> Result<CsiFrame> {
        let b = &self.buf;
        let f32_at = |off: usize| f32::from_le_bytes(b[off..off + 4].try_into().unwrap());
        let ts = u64::from_le_bytes(b[0..8].try_into().unwrap());
        match self.prev_ts {
            Some(prev) if ts <= prev => {
                return Err(self.corrupt(format!("timestamp {ts} not after {prev}")))
            }
            Some(prev) if ts - prev > MAX_TIMESTAMP_GAP_NS => {
                return Err(self.corrupt(format!("timestamp jump {prev} -> {ts}")))
            }
            None if ts > MAX_TIMESTAMP_GAP_NS => {
                return Err(self.corrupt(format!("implausible first timestamp {ts}")))
            }
            _ => {}
        }
        let count = self.header.layout.count;
        let mut off = 8;
        let mut chains = Vec::with_capacity(self.header.chains);
        for _ in 0..self.header.chains {
            let rss = f32_at(off);
            off += 4;
            if rss.is_infinite() {
                return Err(self.corrupt("infinite RSS"));
            }
            let mut csi = Vec::with_capacity(count);
            for _ in 0..count {
                let re = f32_at(off);
                let im = f32_at(off + 4);
                off += 8;
                if !(re.is_finite() && im.is_finite()) {
                    return Err(self.corrupt("non-finite CSI value"));
                }
                csi.push(Complex64::new(re as f64, im as f64));
            }
            let rss = (!rss.is_nan()).then_some(rss as f64);
            chains.push(ChainRecord::new(csi, rss));
        }
        Ok(CsiFrame {
            timestamp_ns: ts,
            chains,
        })
    }

    fn next_frame(&mut self) -> Option<Result<CsiFrame>> {
        if self.done {
            return None;
        }
        let mut buf = std::mem::take(&mut self.buf);
        let n = match fill(&mut self.input, &mut buf) {
            Ok(n) => n,
            Err(e) => {
                self.done = true;
                return Some(Err(e.into()));
            }
        };
        self.buf = buf;
        if n == 0 {
            self.done = true;
            return None;
        }
        if n < self.buf.len() {
            self.done = true;
            self.warnings += 1;
            log::warn!(
                "dropping truncated record {} ({n} of {} bytes)",
                self.index,
                self.buf.len()
            );
            return None;
        }
        let out = self.decode();
        match &out {
            Ok(f) => self.prev_ts = Some(f.timestamp_ns),
            Err(_) => self.done = true,
        }
        self.index += 1;
        Some(out)
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<CsiFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}

/// A fully loaded capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub header: CaptureHeader,
    pub frames: Vec<CsiFrame>,
    pub warnings: usize,
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<Capture> {
    read_capture_from(CaptureReader::open(path)?)
}

pub fn read_capture_from<R: Read>(mut reader: CaptureReader<R>) -> Result<Capture> {
    let mut frames = Vec::new();
    for frame in reader.by_ref() {
        frames.push(frame?);
    }
    Ok(Capture {
        header: reader.header.clone(),
        frames,
        warnings: reader.warnings,
    })
}

pub fn write_capture<'a>(
    path: impl AsRef<Path>,
    header: &CaptureHeader,
    frames: impl IntoIterator<Item = &'a CsiFrame>,
) -> Result<()> {
    let mut w = CaptureWriter::create(path, header.clone())?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()?;
    Ok(())
}
