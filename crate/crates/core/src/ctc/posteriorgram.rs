use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::fst::log_sum_exp;

use super::{Unit, BLANK};

/// Tolerance on `logsumexp(row) == 0` for validated posteriorgrams.
pub const ROW_NORM_TOLERANCE: f64 = 1e-6;

const PGRM_MAGIC: &[u8; 4] = b"PGRM";

/// T×V matrix of per-frame natural-log posteriors, row-major. Unit 0 is
/// blank.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    frames: usize,
    units: usize,
    data: Vec<f64>,
}

impl Posteriorgram {
    /// Builds a posteriorgram, checking that every row is a log-distribution.
    pub fn new(frames: usize, units: usize, data: Vec<f64>) -> Result<Self> {
        let p = Self::new_unchecked(frames, units, data)?;
        for t in 0..frames {
            let z = log_sum_exp(p.row(t));
            if !(z.abs() <= ROW_NORM_TOLERANCE) {
                return Err(Error::validation(format!("row {t} log-sums to {z}, expected 0")));
            }
        }
        Ok(p)
    }

    /// Shape checks only. Used for gradient checks and by models that hand
    /// out raw log-scores.
    pub fn new_unchecked(frames: usize, units: usize, data: Vec<f64>) -> Result<Self> {
        if units < 2 {
            return Err(Error::config(format!("posteriorgram needs at least 2 units, got {units}")));
        }
        if data.len() != frames * units {
            return Err(Error::config(format!(
                "expected {} values for {frames}x{units}, got {}",
                frames * units,
                data.len()
            )));
        }
        Ok(Posteriorgram { frames, units, data })
    }

    /// Normalizes each row of raw scores with a log-softmax.
    pub fn from_scores(frames: usize, units: usize, mut data: Vec<f64>) -> Result<Self> {
        if units < 2 || data.len() != frames * units {
            return Self::new_unchecked(frames, units, data);
        }
        for row in data.chunks_mut(units) {
            let z = log_sum_exp(row);
            for v in row.iter_mut() {
                *v -= z;
            }
        }
        Ok(Posteriorgram { frames, units, data })
    }

    pub fn uniform(frames: usize, units: usize) -> Self {
        let lp = -(units as f64).ln();
        Posteriorgram { frames, units, data: vec![lp; frames * units] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.units..(t + 1) * self.units]
    }

    pub fn get(&self, t: usize, unit: Unit) -> f64 {
        self.data[t * self.units + unit as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn blank_prob(&self, t: usize) -> f64 {
        self.get(t, BLANK).exp()
    }

    /// Every `stride`-th frame, starting at frame 0.
    pub fn subsample(&self, stride: usize) -> Posteriorgram {
        let stride = stride.max(1);
        let mut data = Vec::with_capacity(self.data.len() / stride + self.units);
        let mut frames = 0;
        for t in (0..self.frames).step_by(stride) {
            data.extend_from_slice(self.row(t));
            frames += 1;
        }
        Posteriorgram { frames, units: self.units, data }
    }

    /// Binary layout: `PGRM`, u32 T, u32 V, then T·V little-endian f32.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_matrix(w, PGRM_MAGIC, self.frames, self.units, &self.data)
    }

    /// Reads the binary layout. Rows are renormalized in f64 to remove f32
    /// rounding; rows that are far from normalized are rejected.
    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (frames, units, data) = read_matrix(r, PGRM_MAGIC)?;
        Self::renormalized(frames, units, data)
    }

    /// One whitespace-separated row per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut data = Vec::new();
        let mut units = None;
        let mut frames = 0;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(idx + 1, format!("bad value {f:?}"))))
                .collect::<Result<_>>()?;
            match units {
                None => units = Some(row.len()),
                Some(u) if u != row.len() => {
                    return Err(Error::parse(idx + 1, format!("row has {} values, expected {u}", row.len())))
                }
                _ => {}
            }
            data.extend(row);
            frames += 1;
        }
        Self::new(frames, units.unwrap_or(2), data)
    }

    fn renormalized(frames: usize, units: usize, mut data: Vec<f64>) -> Result<Self> {
        if units < 2 {
            return Err(Error::validation(format!("posteriorgram needs at least 2 units, got {units}")));
        }
        for (t, row) in data.chunks_mut(units).enumerate() {
            let z = log_sum_exp(row);
            if !(z.abs() <= 1e-3) {
                return Err(Error::validation(format!("row {t} log-sums to {z}, expected 0")));
            }
            for v in row.iter_mut() {
                *v -= z;
            }
        }
        Ok(Posteriorgram { frames, units, data })
    }
}

pub(crate) fn write_matrix<W: Write>(mut w: W, magic: &[u8; 4], rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let as_u32 =
        |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::config(format!("{what} {v} does not fit in u32")));
    let mut buf = Vec::with_capacity(12 + data.len() * 4);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&as_u32(rows, "row count")?.to_le_bytes());
    buf.extend_from_slice(&as_u32(cols, "column count")?.to_le_bytes());
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_matrix<R: Read>(mut r: R, magic: &[u8; 4]) -> Result<(usize, usize, Vec<f64>)> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header).map_err(|e| Error::validation(format!("truncated matrix header: {e}")))?;
    if &header[..4] != magic {
        return Err(Error::validation(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&header[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != rows * cols * 4 {
        return Err(Error::validation(format!("matrix body has {} bytes, expected {}", body.len(), rows * cols * 4)));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok((rows, cols, data))
}
