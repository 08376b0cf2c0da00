//! Latency-controlled chunked evaluation of frame-wise encoders:
//! overlapping chunks of `CS` frames advancing by `CS − RC`, carried
//! left state, right-context outputs discarded and recomputed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub chunk_size: usize,
    pub right_context: usize,
}

impl StreamConfig {
    pub fn new(chunk_size: usize, right_context: usize) -> Result<Self> {
        let cfg = StreamConfig { chunk_size, right_context };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.right_context >= self.chunk_size {
            return Err(Error::config(format!(
                "right context {} must be smaller than chunk size {}",
                self.right_context, self.chunk_size
            )));
        }
        Ok(())
    }

    /// Frames the window advances per chunk.
    pub fn step(&self) -> usize {
        self.chunk_size - self.right_context
    }

    /// Chunks needed for `frames` input frames.
    pub fn chunk_count(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            frames.saturating_sub(self.chunk_size).div_ceil(self.step()) + 1
        }
    }
}

/// A frame-wise encoder that can be run a chunk at a time.
pub trait ChunkEncoder {
    type State: Clone;

    fn initial_state(&self) -> Self::State;

    /// How many future frames an output frame may depend on.
    fn right_reach(&self) -> usize;

    /// Encodes `chunk` starting from `state`. Returns one output per input
    /// frame and the state after the first `keep` frames.
    fn process(&self, chunk: &[Vec<f64>], state: &Self::State, keep: usize) -> (Vec<Vec<f64>>, Self::State);
}

/// Runs `enc` over `frames` chunk by chunk. Each chunk keeps its first
/// `CS − RC` outputs (the final chunk keeps all) and hands on the state
/// at that boundary. Output length always equals input length.
pub fn stream<E: ChunkEncoder>(frames: &[Vec<f64>], enc: &E, cfg: &StreamConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(frames.len());
    let mut state = enc.initial_state();
    let mut start = 0;
    while start < frames.len() {
        let end = (start + cfg.chunk_size).min(frames.len());
        let last = end == frames.len();
        let keep = if last { end - start } else { cfg.step() };
        let (chunk_out, next) = enc.process(&frames[start..end], &state, keep);
        debug_assert_eq!(chunk_out.len(), end - start);
        out.extend(chunk_out.into_iter().take(keep));
        if last {
            break;
        }
        state = next;
        start += cfg.step();
    }
    Ok(out)
}

/// Worst-case algorithmic latency: a frame waits at most one chunk.
pub fn latency(cfg: &StreamConfig, frame_shift_ms: f64) -> f64 {
    cfg.chunk_size as f64 * frame_shift_ms
}

/// For each output frame, how many input frames had arrived when it was
/// emitted (the end of the chunk that kept it).
pub fn emission_schedule(frames: usize, cfg: &StreamConfig) -> Vec<usize> {
    let mut emitted = Vec::with_capacity(frames);
    let mut start = 0;
    while start < frames {
        let end = (start + cfg.chunk_size).min(frames);
        let keep = if end == frames { end - start } else { cfg.step() };
        emitted.extend(std::iter::repeat_n(end, keep));
        start += cfg.step();
        if end == frames {
            break;
        }
    }
    emitted
}

/// Passes frames through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEncoder;

impl ChunkEncoder for IdentityEncoder {
    type State = ();

    fn initial_state(&self) {}

    fn right_reach(&self) -> usize {
        0
    }

    fn process(&self, chunk: &[Vec<f64>], _: &(), _: usize) -> (Vec<Vec<f64>>, ()) {
        (chunk.to_vec(), ())
    }
}

/// Mean over the window `[t − left, t + right]`, clipped at the sequence
/// edges. The last `left` frames are carried between chunks.
#[derive(Debug, Clone, Copy)]
pub struct MovingAverage {
    pub left: usize,
    pub right: usize,
}

impl MovingAverage {
    /// Whole-sequence application.
    pub fn apply(&self, frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.process(frames, &Vec::new(), frames.len()).0
    }
}

impl ChunkEncoder for MovingAverage {
    type State = Vec<Vec<f64>>;

    fn initial_state(&self) -> Self::State {
        Vec::new()
    }

    fn right_reach(&self) -> usize {
        self.right
    }

    fn process(&self, chunk: &[Vec<f64>], state: &Self::State, keep: usize) -> (Vec<Vec<f64>>, Self::State) {
        let history = state.len();
        let all: Vec<&Vec<f64>> = state.iter().chain(chunk).collect();
        let outputs = (0..chunk.len())
            .map(|i| {
                let t = history + i;
                let lo = t.saturating_sub(self.left);
                let hi = (t + self.right).min(all.len() - 1);
                let dim = all[t].len();
                let mut mean = vec![0.0; dim];
                for f in &all[lo..=hi] {
                    for (m, v) in mean.iter_mut().zip(f.iter()) {
                        *m += v;
                    }
                }
                let n = (hi - lo + 1) as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                mean
            })
            .collect();
        let boundary = history + keep;
        let carried = all[boundary.saturating_sub(self.left)..boundary].iter().map(|f| (*f).clone()).collect();
        (outputs, carried)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect()
    }

    #[test]
    fn identity_passes_through() {
        let x = ramp(17);
        for cs in 1..6 {
            for rc in 0..cs {
                assert_eq!(stream(&x, &IdentityEncoder, &StreamConfig::new(cs, rc).unwrap()).unwrap(), x);
            }
        }
        assert!(stream(&[], &IdentityEncoder, &StreamConfig::new(3, 1).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn moving_average_matches_full_sequence() {
        let enc = MovingAverage { left: 3, right: 2 };
        let x = ramp(30);
        let full = enc.apply(&x);
        let got = stream(&x, &enc, &StreamConfig::new(8, 4).unwrap()).unwrap();
        for (a, b) in got.iter().zip(&full) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn latency_is_chunk_duration() {
        assert_eq!(latency(&StreamConfig::new(20, 0).unwrap(), 10.0), 200.0);
        assert_eq!(latency(&StreamConfig::new(20, 15).unwrap(), 10.0), 200.0);
        assert!(StreamConfig::new(4, 4).is_err());
    }

    #[test]
    fn chunk_count_formula() {
        let cfg = StreamConfig::new(5, 2).unwrap();
        assert_eq!(cfg.chunk_count(0), 0);
        assert_eq!(cfg.chunk_count(5), 1);
        assert_eq!(cfg.chunk_count(6), 2);
        assert_eq!(cfg.chunk_count(8), 2);
        assert_eq!(cfg.chunk_count(9), 3);
    }
}
