//! Hybrid CTC speech-recognition toolkit.
//!
//! * [`fst`]: weighted transducers over the tropical and log semirings.
//! * [`ctc`]: posteriorgrams, the collapse map and the CTC loss.
//! * [`wordpiece`]: unigram-LM wordpiece training and segmentation.
//! * [`graph`]: ARPA LMs, lexicons and blank-aware decoding graphs.
//! * [`decoder`]: beam search with blank-frame skipping, n-best rescoring, WER.
//! * [`streaming`]: chunked evaluation with carried state and right context.
//! * [`am`]: a small trainable acoustic model and synthetic corpora.

pub mod am;
pub mod ctc;
pub mod decoder;
pub mod error;
pub mod fst;
pub mod graph;
pub mod streaming;
pub mod wordpiece;

pub use error::{Error, Result};
