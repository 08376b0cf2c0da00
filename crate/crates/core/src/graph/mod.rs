//! Decoding graph construction: ARPA language models (G), lexicons (L),
//! CTC and HMM topologies (H) and the blank conversion of HMM graphs.
//!
//! Frame-level graphs read acoustic unit `u` as input label `u + 1` (see
//! [`unit_label`]); label 0 stays ε.

mod arpa;
mod build;
mod lexicon;
mod topology;

pub use arpa::{lm_to_fst, parse_arpa, NGramEntry, NGramLm, BOS, EOS};
pub use build::{build_decoding_graph, build_hmm_graph, GraphInputs};
pub use lexicon::{build_l, Lexicon};
pub use topology::{
    build_h_wordpiece, build_hmm_h, ctc_convert, frame_symbols, label_unit, unit_label, unit_symbols, BLANK_LABEL,
};
