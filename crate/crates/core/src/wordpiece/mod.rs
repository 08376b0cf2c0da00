//! Unigram-LM wordpieces with a word-start marker prefix (`_he ll o`).

mod model;
mod train;

pub use model::{detokenize, Piece, SegmentMode, Segmentation, WordpieceModel, WORD_START};
pub use train::{
    parse_vocab_size, read_corpus, required_pieces, train_wordpiece, TrainConfig, TrainReport, UnigramTrainer,
    WordCounts, VOCAB_PRESETS,
};
