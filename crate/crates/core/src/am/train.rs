use log::{info, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::LabelSequence;
use crate::error::{Error, Result};

use super::features::FeatureMatrix;
use super::model::ToyModel;

/// RMSProp with a warmup → hold → exponential-decay learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Learning rate of the hold stage.
    pub peak_lr: f64,
    /// Warmup starts at `peak_lr * init_lr_scale`.
    pub init_lr_scale: f64,
    /// Decay ends at `peak_lr * final_lr_scale`.
    pub final_lr_scale: f64,
    /// Fractions of all steps spent warming up and holding.
    pub warmup: f64,
    pub hold: f64,
    /// Decay of the squared-gradient average.
    pub rho: f64,
    pub epsilon: f64,
    /// Decoupled L2 shrinkage applied each step as `p -= lr * weight_decay * p`.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            peak_lr: 1e-3,
            init_lr_scale: 0.01,
            final_lr_scale: 0.05,
            warmup: 0.1,
            hold: 0.4,
            rho: 0.99,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions_ok = self.warmup >= 0.0 && self.hold >= 0.0 && self.warmup + self.hold <= 1.0;
        if !(self.peak_lr > 0.0 && fractions_ok && self.init_lr_scale > 0.0 && self.final_lr_scale > 0.0) {
            return Err(Error::config(format!("invalid optimizer settings {self:?}")));
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon <= 0.0 || !(self.weight_decay >= 0.0) {
            return Err(Error::config("rho must be in [0, 1), epsilon positive and weight_decay non-negative"));
        }
        Ok(())
    }

    /// Learning rate at `step` (0-based) of `total` steps.
    pub fn lr(&self, step: usize, total: usize) -> f64 {
        let total = total.max(1) as f64;
        let pos = step as f64;
        let warm = self.warmup * total;
        let hold_end = warm + self.hold * total;
        if pos < warm {
            self.peak_lr * (self.init_lr_scale + (1.0 - self.init_lr_scale) * pos / warm)
        } else if pos < hold_end {
            self.peak_lr
        } else {
            let span = (total - hold_end).max(1.0);
            self.peak_lr * self.final_lr_scale.powf(((pos - hold_end) / span).min(1.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
    /// Drop a random number (below the stride) of leading frames each time
    /// an utterance is used, so every subsampling phase is seen.
    pub random_phase: bool,
}

impl Default for AmTrainConfig {
    fn default() -> Self {
        AmTrainConfig { epochs: 20, batch_size: 8, optimizer: OptimizerConfig::default(), seed: 0, random_phase: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmTrainReport {
    /// Mean per-utterance CTC loss of each epoch, measured during training.
    pub epoch_losses: Vec<f64>,
    /// Utterances left out because their target is infeasible at the
    /// model's output frame rate.
    pub skipped: usize,
    pub steps: usize,
}

/// Mini-batch RMSProp on summed CTC loss (averaged over the batch).
pub fn train(
    model: &mut ToyModel,
    data: &[(FeatureMatrix, LabelSequence)],
    cfg: &AmTrainConfig,
) -> Result<AmTrainReport> {
    cfg.optimizer.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let usable: Vec<usize> = (0..data.len())
        .filter(|&i| {
            let (feats, target) = &data[i];
            let ok = target.is_feasible(model.output_frames(feats.frames()));
            if !ok {
                warn!(
                    "utterance {i}: {} labels do not fit in {} output frames at stride {}; skipped",
                    target.len(),
                    model.output_frames(feats.frames()),
                    model.config().stride
                );
            }
            ok
        })
        .collect();
    let skipped = data.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::validation("no utterance has a feasible target at this stride"));
    }
    let batches_per_epoch = usable.len().div_ceil(cfg.batch_size);
    let total = batches_per_epoch * cfg.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = usable.clone();
    let mut sq = vec![0.0; model.params().len()];
    let mut step = 0;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let opt = cfg.optimizer;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; model.params().len()];
            for &i in batch {
                let (feats, target) = &data[i];
                let stride = model.config().stride;
                let shift = if cfg.random_phase && stride > 1 { rng.random_range(0..stride) } else { 0 };
                let shift = shift.min(feats.frames() - 1);
                let shifted;
                let feats = if shift > 0 && target.is_feasible(model.output_frames(feats.frames() - shift)) {
                    shifted = feats.skip_frames(shift);
                    &shifted
                } else {
                    feats
                };
                let (loss, g, _) = model.loss_and_grad(feats, target)?;
                loss_sum += loss;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b / batch.len() as f64;
                }
            }
            let lr = opt.lr(step, total);
            for ((p, g), s) in model.params_mut().iter_mut().zip(&grad).zip(sq.iter_mut()) {
                *s = opt.rho * *s + (1.0 - opt.rho) * g * g;
                *p -= lr * (g / (s.sqrt() + opt.epsilon) + opt.weight_decay * *p);
            }
            step += 1;
        }
        let mean = loss_sum / usable.len() as f64;
        info!("epoch {}: mean CTC loss {mean:.4}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(AmTrainReport { epoch_losses, skipped, steps: step })
}
