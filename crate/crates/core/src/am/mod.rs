//! A small trainable CTC acoustic model (MLP over spliced frames with
//! frame subsampling) and the synthetic corpora it is trained on.

mod features;
mod model;
mod synth;
mod train;

pub use features::FeatureMatrix;
pub use model::{forward_streaming, AmEncoder, ModelConfig, ToyModel};
pub use synth::{read_corpus, synth_generate, word_counts, write_corpus, Grammar, SynthCorpus, SynthSpec, Utterance};
pub use train::{train, AmTrainConfig, AmTrainReport, OptimizerConfig};

use crate::ctc::LabelSequence;

/// Fraction of `(input frames, target)` pairs that no CTC alignment can
/// fit once the frames are subsampled by `stride`.
pub fn infeasible_fraction(items: &[(usize, &LabelSequence)], stride: usize) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let bad = items.iter().filter(|(frames, t)| !t.is_feasible(frames.div_ceil(stride))).count();
    bad as f64 / items.len() as f64
}
