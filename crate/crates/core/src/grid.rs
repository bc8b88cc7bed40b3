//! Taxel grid domain types and the shared file formats.
//!
//! A tactile frame is one time-step of per-taxel normal-force readings on a
//! `rows x cols` grid, stored row-major: `values[r * cols + c]` is the taxel
//! at row `r`, column `c`. Every module in this crate shares that
//! convention.
//!
//! Recordings and measurement sets are persisted in the `TXCS` container:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TXCS"
//! 4       1     format version (currently 1)
//! 5       1     record type: 0 = recording, 1 = measurement set
//! 6       2     reserved (zero)
//! 8       4     rows (u32, little-endian)
//! 12      4     cols (u32)
//! 16      4     frame count T (u32)
//! 20      8     dt in seconds per time-step (f64)
//! 28      4     sensor range minimum f_min in Newtons (f32)
//! 32      4     sensor range maximum f_max in Newtons (f32)
//! ```
//!
//! A recording (type 0) is followed by `T * rows * cols` little-endian f32
//! values, row-major per frame. A measurement set (type 1) carries an
//! extension header (`m` u32, `block_size` u32, `seed` u64) followed by
//! `T * m` little-endian f32 values. The f32 payload matches the sensors'
//! precision; in-memory values are f64 for solver arithmetic.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Default sensor range lower bound in Newtons.
pub const DEFAULT_FORCE_MIN: f64 = 0.0;
/// Default sensor range upper bound in Newtons.
pub const DEFAULT_FORCE_MAX: f64 = 2.5;

const MAGIC: [u8; 4] = *b"TXCS";
const FORMAT_VERSION: u8 = 1;
const RECORD_RECORDING: u8 = 0;
const RECORD_MEASUREMENTS: u8 = 1;
const HEADER_LEN: usize = 36;
const MEAS_EXT_LEN: usize = 16;

/// Dimensions of a taxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    rows: usize,
    cols: usize,
}

impl GridShape {
    /// Both dimensions must be at least 2.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        Ok(GridShape { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total taxel count N.
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major index of the taxel at `(r, c)`.
    pub fn index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.rows && c < self.cols);
        r * self.cols + c
    }
}

/// One time-step of per-taxel force values in Newtons.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    shape: GridShape,
    values: Vec<f64>,
}

impl Frame {
    /// Validates length and finiteness.
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.n() {
            return Err(Error::DimensionMismatch(format!(
                "frame for {}x{} grid needs {} values, got {}",
                shape.rows,
                shape.cols,
                shape.n(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "frame value at index {pos} is not finite"
            )));
        }
        Ok(Frame { shape, values })
    }

    /// All-zero frame.
    pub fn zeros(shape: GridShape) -> Self {
        Frame {
            shape,
            values: vec![0.0; shape.n()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at row `r`, column `c`.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[self.shape.index(r, c)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Time-ordered sequence of frames with acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    shape: GridShape,
    dt: f64,
    frames: Vec<Frame>,
    f_min: f64,
    f_max: f64,
}

impl Recording {
    pub fn new(
        shape: GridShape,
        dt: f64,
        frames: Vec<Frame>,
        f_min: f64,
        f_max: f64,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if !(f_min.is_finite() && f_max.is_finite() && f_min < f_max) {
            return Err(Error::InvalidParameter(format!(
                "sensor range must satisfy f_min < f_max, got [{f_min}, {f_max}]"
            )));
        }
        if let Some(t) = frames.iter().position(|f| f.shape() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "frame {t} does not match the recording shape {}x{}",
                shape.rows, shape.cols
            )));
        }
        Ok(Recording {
            shape,
            dt,
            frames,
            f_min,
            f_max,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Number of time-steps T.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Sensor range width, used as the PSNR peak.
    pub fn range_width(&self) -> f64 {
        self.f_max - self.f_min
    }
}

/// One time-step of aggregated (unitless) measurement readings.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
}

impl MeasurementVector {
    pub fn new(values: Vec<f64>) -> Self {
        MeasurementVector { values }
    }

    /// Measurement count M.
    pub fn m(&self) -> usize {
        self.values.len()
    }
}

/// Per-frame measurement vectors plus everything needed to rebuild the
/// operator that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub shape: GridShape,
    pub dt: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub m: usize,
    pub block_size: usize,
    pub seed: u64,
    pub vectors: Vec<MeasurementVector>,
}

fn header_bytes(record_type: u8, shape: GridShape, t: usize, dt: f64, f_min: f64, f_max: f64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(&MAGIC);
    buf.push(FORMAT_VERSION);
    buf.push(record_type);
    buf.extend_from_slice(&[0u8; 2]);
    buf.extend_from_slice(&(shape.rows as u32).to_le_bytes());
    buf.extend_from_slice(&(shape.cols as u32).to_le_bytes());
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&dt.to_le_bytes());
    buf.extend_from_slice(&(f_min as f32).to_le_bytes());
    buf.extend_from_slice(&(f_max as f32).to_le_bytes());
    debug_assert_eq!(buf.len(), HEADER_LEN);
    buf
}

struct Header {
    record_type: u8,
    shape: GridShape,
    t: usize,
    dt: f64,
    f_min: f64,
    f_max: f64,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{}: bad magic (file has {} bytes, header needs {HEADER_LEN})",
            path.display(),
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported format version {} (expected {FORMAT_VERSION})",
            path.display(),
            bytes[4]
        )));
    }
    let record_type = bytes[5];
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let dt = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let f_min = f32::from_le_bytes(bytes[28..32].try_into().unwrap()) as f64;
    let f_max = f32::from_le_bytes(bytes[32..36].try_into().unwrap()) as f64;
    let shape = GridShape::new(rows, cols)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(Header {
        record_type,
        shape,
        t,
        dt,
        f_min,
        f_max,
    })
}

fn payload_f32(bytes: &[u8], offset: usize, count: usize, path: &Path) -> Result<Vec<f64>> {
    // Checked arithmetic: a corrupt header may claim absurd counts.
    let expected = count
        .checked_mul(4)
        .and_then(|p| p.checked_add(offset))
        .ok_or_else(|| {
            Error::Format(format!(
                "{}: header claims an impossible payload size",
                path.display()
            ))
        })?;
    if bytes.len() < expected {
        return Err(Error::Format(format!(
            "{}: truncated payload, expected {expected} bytes but file has {}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[offset..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect())
}

/// Writes a recording in the TXCS binary format.
///
/// Values are stored as f32; exact round-tripping therefore holds for
/// f32-representable values.
pub fn write_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = header_bytes(
        RECORD_RECORDING,
        rec.shape(),
        rec.len(),
        rec.dt(),
        rec.f_min(),
        rec.f_max(),
    );
    buf.reserve(rec.len() * rec.shape().n() * 4);
    for (t, frame) in rec.frames().iter().enumerate() {
        for &v in frame.values() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "frame {t} contains a non-finite value; nothing written"
                )));
            }
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Reads a recording written by [`write_recording`].
pub fn read_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes, path)?;
    if header.record_type != RECORD_RECORDING {
        return Err(Error::Format(format!(
            "{}: record type {} is not a recording",
            path.display(),
            header.record_type
        )));
    }
    let n = header.shape.n();
    let count = header.t.checked_mul(n).ok_or_else(|| {
        Error::Format(format!(
            "{}: header claims an impossible frame count",
            path.display()
        ))
    })?;
    let flat = payload_f32(&bytes, HEADER_LEN, count, path)?;
    let frames = flat
        .chunks_exact(n)
        .map(|chunk| Frame::new(header.shape, chunk.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Recording::new(header.shape, header.dt, frames, header.f_min, header.f_max)
}

/// Writes per-frame measurement vectors in the TXCS container
/// (record type 1).
pub fn write_measurements(set: &MeasurementSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(t) = set.vectors.iter().position(|v| v.m() != set.m) {
        return Err(Error::DimensionMismatch(format!(
            "measurement vector {t} has {} values, expected m = {}",
            set.vectors[t].m(),
            set.m
        )));
    }
    let mut buf = header_bytes(
        RECORD_MEASUREMENTS,
        set.shape,
        set.vectors.len(),
        set.dt,
        set.f_min,
        set.f_max,
    );
    buf.extend_from_slice(&(set.m as u32).to_le_bytes());
    buf.extend_from_slice(&(set.block_size as u32).to_le_bytes());
    buf.extend_from_slice(&set.seed.to_le_bytes());
    buf.reserve(set.vectors.len() * set.m * 4);
    for (t, vec) in set.vectors.iter().enumerate() {
        for &v in &vec.values {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "measurement vector {t} contains a non-finite value; nothing written"
                )));
            }
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Reads a measurement set written by [`write_measurements`].
pub fn read_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes, path)?;
    if header.record_type != RECORD_MEASUREMENTS {
        return Err(Error::Format(format!(
            "{}: record type {} is not a measurement set",
            path.display(),
            header.record_type
        )));
    }
    let ext_end = HEADER_LEN + MEAS_EXT_LEN;
    if bytes.len() < ext_end {
        return Err(Error::Format(format!(
            "{}: truncated payload, expected {ext_end} bytes but file has {}",
            path.display(),
            bytes.len()
        )));
    }
    let m = u32::from_le_bytes(bytes[36..40].try_into().unwrap()) as usize;
    let block_size = u32::from_le_bytes(bytes[40..44].try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(bytes[44..52].try_into().unwrap());
    if m == 0 {
        return Err(Error::Format(format!(
            "{}: measurement count in header is zero",
            path.display()
        )));
    }
    let count = header.t.checked_mul(m).ok_or_else(|| {
        Error::Format(format!(
            "{}: header claims an impossible measurement count",
            path.display()
        ))
    })?;
    let flat = payload_f32(&bytes, ext_end, count, path)?;
    let vectors = flat
        .chunks_exact(m)
        .map(|chunk| MeasurementVector::new(chunk.to_vec()))
        .collect();
    Ok(MeasurementSet {
        shape: header.shape,
        dt: header.dt,
        f_min: header.f_min,
        f_max: header.f_max,
        m,
        block_size,
        seed,
        vectors,
    })
}

/// Exports a recording as CSV: one row per time-step with columns
/// `t,i0,...,i(N-1)` in decimal text.
pub fn write_recording_csv(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push('t');
    for i in 0..rec.shape().n() {
        out.push_str(&format!(",i{i}"));
    }
    out.push('\n');
    for (t, frame) in rec.frames().iter().enumerate() {
        out.push_str(&t.to_string());
        for &v in frame.values() {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
