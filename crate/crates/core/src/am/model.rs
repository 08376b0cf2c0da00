use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::{ctc_loss, LabelSequence, Posteriorgram};
use crate::error::{Error, Result};
use crate::streaming::ChunkEncoder;

use super::features::FeatureMatrix;

const MAGIC: &[u8; 4] = b"WPAM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Frames spliced on each side of the centre frame.
    pub context: usize,
    /// Keep every `stride`-th frame.
    pub stride: usize,
    pub hidden: Vec<usize>,
    /// Output units including blank.
    pub units: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.stride == 0 || self.units < 2 || self.hidden.contains(&0) {
            return Err(Error::config(format!("invalid model shape {self:?}")));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim * (2 * self.context + 1);
        for &h in self.hidden.iter().chain(std::iter::once(&self.units)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Feed-forward net over spliced frames: tanh hidden layers, log-softmax
/// output, frame subsampling by `stride`. Parameters are one flat vector
/// holding each layer's row-major weights followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    cfg: ModelConfig,
    params: Vec<f64>,
}

/// Per-layer activations of one frame, kept for back-propagation.
struct Trace {
    acts: Vec<Vec<f64>>,
}

impl ToyModel {
    /// Xavier-uniform weights, zero biases.
    pub fn new<R: Rng>(cfg: ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut params = Vec::with_capacity(cfg.num_params());
        for (i, o) in cfg.layer_dims() {
            let a = (6.0 / (i + o) as f64).sqrt();
            params.extend((0..i * o).map(|_| rng.random_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, o));
        }
        Ok(ToyModel { cfg, params })
    }

    pub fn zeros(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let params = vec![0.0; cfg.num_params()];
        Ok(ToyModel { cfg, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_frames(&self, input_frames: usize) -> usize {
        input_frames.div_ceil(self.cfg.stride)
    }

    fn check_dim(&self, feats: &FeatureMatrix) -> Result<()> {
        if feats.dim() != self.cfg.input_dim {
            return Err(Error::validation(format!(
                "features have dimension {}, model expects {}",
                feats.dim(),
                self.cfg.input_dim
            )));
        }
        Ok(())
    }

    /// Log posteriors of one spliced input vector.
    fn run(&self, input: &[f64]) -> Trace {
        let dims = self.cfg.layer_dims();
        let mut acts = vec![input.to_vec()];
        let mut off = 0;
        for (li, &(i, o)) in dims.iter().enumerate() {
            let (w, rest) = self.params[off..].split_at(i * o);
            let b = &rest[..o];
            off += i * o + o;
            let x = acts.last().unwrap();
            let mut y: Vec<f64> = b.to_vec();
            for (r, yr) in y.iter_mut().enumerate() {
                *yr += w[r * i..(r + 1) * i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            if li + 1 < dims.len() {
                y.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z = m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                y.iter_mut().for_each(|v| *v -= z);
            }
            acts.push(y);
        }
        Trace { acts }
    }

    /// Log posteriors for every input frame (no subsampling).
    pub fn frame_posteriors(&self, feats: &FeatureMatrix, t: usize, buf: &mut Vec<f64>) -> Vec<f64> {
        feats.splice(t, self.cfg.context, buf);
        self.run(buf).acts.pop().unwrap()
    }

    /// `ceil(T / stride)` rows of log posteriors.
    pub fn forward(&self, feats: &FeatureMatrix) -> Result<Posteriorgram> {
        self.check_dim(feats)?;
        let mut buf = Vec::new();
        let mut data = Vec::with_capacity(self.output_frames(feats.frames()) * self.cfg.units);
        for t in (0..feats.frames()).step_by(self.cfg.stride) {
            data.extend(self.frame_posteriors(feats, t, &mut buf));
        }
        Posteriorgram::new_unchecked(self.output_frames(feats.frames()), self.cfg.units, data)
    }

    /// CTC loss of `target` and its gradient with respect to every
    /// parameter. Infeasible targets give an infinite loss and zero gradient.
    pub fn loss_and_grad(&self, feats: &FeatureMatrix, target: &LabelSequence) -> Result<(f64, Vec<f64>, bool)> {
        self.check_dim(feats)?;
        let mut grad = vec![0.0; self.params.len()];
        let frames: Vec<usize> = (0..feats.frames()).step_by(self.cfg.stride).collect();
        let mut buf = Vec::new();
        let traces: Vec<Trace> = frames
            .iter()
            .map(|&t| {
                feats.splice(t, self.cfg.context, &mut buf);
                self.run(&buf)
            })
            .collect();
        let v = self.cfg.units;
        let data: Vec<f64> = traces.iter().flat_map(|tr| tr.acts.last().unwrap().iter().copied()).collect();
        let post = Posteriorgram::new_unchecked(frames.len(), v, data)?;
        let out = ctc_loss(&post, target)?;
        if !out.feasible {
            return Ok((out.loss, grad, false));
        }
        let dims = self.cfg.layer_dims();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, &(i, o)| {
                let here = *acc;
                *acc += i * o + o;
                Some(here)
            })
            .collect();
        for (f, tr) in traces.iter().enumerate() {
            let g_logp = &out.grad[f * v..(f + 1) * v];
            let logp = tr.acts.last().unwrap();
            let total: f64 = g_logp.iter().sum();
            // log-softmax Jacobian
            let mut delta: Vec<f64> = g_logp.iter().zip(logp).map(|(g, lp)| g - lp.exp() * total).collect();
            for li in (0..dims.len()).rev() {
                let (i, o) = dims[li];
                let x = &tr.acts[li];
                let off = offsets[li];
                for r in 0..o {
                    let d = delta[r];
                    if d != 0.0 {
                        for (gw, xv) in grad[off + r * i..off + (r + 1) * i].iter_mut().zip(x) {
                            *gw += d * xv;
                        }
                    }
                    grad[off + i * o + r] += d;
                }
                if li > 0 {
                    let w = &self.params[off..off + i * o];
                    let mut prev = vec![0.0; i];
                    for r in 0..o {
                        let d = delta[r];
                        if d != 0.0 {
                            for (p, wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                                *p += d * wv;
                            }
                        }
                    }
                    // tanh'(z) = 1 − tanh(z)²
                    for (p, a) in prev.iter_mut().zip(x) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        Ok((out.loss, grad, true))
    }

    /// `WPAM`, u32 version, u32 input_dim, context, stride, units, hidden
    /// layer count, each hidden size, u32 parameter count, then f32 values.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        let header = [
            VERSION as usize,
            self.cfg.input_dim,
            self.cfg.context,
            self.cfg.stride,
            self.cfg.units,
            self.cfg.hidden.len(),
        ];
        for v in header.iter().chain(&self.cfg.hidden).chain(std::iter::once(&self.params.len())) {
            let v = u32::try_from(*v).map_err(|_| Error::config("model dimension does not fit in u32"))?;
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &p in &self.params {
            buf.extend_from_slice(&(p as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::validation("not a model checkpoint (bad magic)"));
        }
        let mut pos = 4;
        let mut next = || -> Result<usize> {
            let b = bytes.get(pos..pos + 4).ok_or_else(|| Error::validation("truncated checkpoint"))?;
            pos += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
        };
        let version = next()?;
        if version != VERSION as usize {
            return Err(Error::validation(format!("unsupported checkpoint version {version}")));
        }
        let (input_dim, context, stride, units, layers) = (next()?, next()?, next()?, next()?, next()?);
        let hidden = (0..layers).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let n = next()?;
        let cfg = ModelConfig { input_dim, context, stride, hidden, units };
        cfg.validate()?;
        if n != cfg.num_params() {
            return Err(Error::validation(format!(
                "checkpoint holds {n} parameters, shape needs {}",
                cfg.num_params()
            )));
        }
        let start = 4 * (8 + layers);
        let body = &bytes[start..];
        if body.len() != 4 * n {
            return Err(Error::validation("checkpoint parameter block has the wrong length"));
        }
        let params = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        Ok(ToyModel { cfg, params })
    }
}

/// Runs a model as a chunk encoder at the full input frame rate. The
/// carried state is the last `context` input frames.
pub struct AmEncoder<'a>(pub &'a ToyModel);

impl ChunkEncoder for AmEncoder<'_> {
    type State = Vec<Vec<f64>>;

    fn initial_state(&self) -> Self::State {
        Vec::new()
    }

    fn right_reach(&self) -> usize {
        self.0.cfg.context
    }

    fn process(&self, chunk: &[Vec<f64>], state: &Self::State, keep: usize) -> (Vec<Vec<f64>>, Self::State) {
        let history = state.len();
        let rows: Vec<Vec<f64>> = state.iter().chain(chunk).cloned().collect();
        let local = FeatureMatrix::from_rows(&rows).expect("chunk rows share the model's dimension");
        let mut buf = Vec::new();
        let out = (0..chunk.len()).map(|i| self.0.frame_posteriors(&local, history + i, &mut buf)).collect();
        let boundary = history + keep;
        let carried = rows[boundary.saturating_sub(self.0.cfg.context)..boundary].to_vec();
        (out, carried)
    }
}

/// Chunked forward pass: streams at the input frame rate, then keeps
/// every `stride`-th row. Equals [`ToyModel::forward`] whenever the right
/// context covers the splice context.
pub fn forward_streaming(
    model: &ToyModel,
    feats: &FeatureMatrix,
    cfg: &crate::streaming::StreamConfig,
) -> Result<Posteriorgram> {
    model.check_dim(feats)?;
    let rows = crate::streaming::stream(&feats.rows(), &AmEncoder(model), cfg)?;
    let kept: Vec<f64> = rows.into_iter().step_by(model.cfg.stride).flatten().collect();
    Posteriorgram::new_unchecked(model.output_frames(feats.frames()), model.cfg.units, kept)
}
