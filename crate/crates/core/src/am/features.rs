use std::io::{BufRead, Read, Write};

use crate::ctc::{read_matrix, write_matrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FEAT";

/// T×D row-major feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * dim {
            return Err(Error::validation(format!("{} values for a {frames}x{dim} feature matrix", data.len())));
        }
        if dim == 0 {
            return Err(Error::validation("feature dimension must be positive"));
        }
        Ok(FeatureMatrix { frames, dim, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::validation("feature rows differ in length"));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    /// The matrix without its first `n` frames.
    pub fn skip_frames(&self, n: usize) -> FeatureMatrix {
        let n = n.min(self.frames);
        FeatureMatrix { frames: self.frames - n, dim: self.dim, data: self.data[n * self.dim..].to_vec() }
    }

    /// Frames `t - context ..= t + context` concatenated, with the first and
    /// last frames repeated past the edges.
    pub fn splice(&self, t: usize, context: usize, out: &mut Vec<f64>) {
        out.clear();
        let last = self.frames as isize - 1;
        for o in -(context as isize)..=context as isize {
            let s = (t as isize + o).clamp(0, last) as usize;
            out.extend_from_slice(self.row(s));
        }
    }

    /// `FEAT`, u32 frames, u32 dim, then little-endian f32 values.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_matrix(w, MAGIC, self.frames, self.dim, &self.data)
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (frames, dim, data) = read_matrix(r, MAGIC)?;
        Self::new(frames, dim, data)
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
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}
