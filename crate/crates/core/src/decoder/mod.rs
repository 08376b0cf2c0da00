//! Frame-synchronous token-passing Viterbi search over frame-level
//! decoding graphs, with blank-frame skipping, n-best output and
//! rescoring/WER utilities.

mod nbest;
mod search;

pub use nbest::{oracle_wer, read_nbest_text, rescore_nbest, wer, word_errors, Hypothesis, NBestList};
pub use search::{decode, DecodeConfig, DecodeStats, Decoder};
