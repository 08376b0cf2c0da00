use log::info;

use crate::error::{Error, Result};
use crate::fst::{compose, connect, Label, Wfst};
use crate::wordpiece::WordpieceModel;

use super::arpa::{lm_to_fst, NGramLm};
use super::lexicon::{build_l, Lexicon};
use super::topology::{build_h_wordpiece, build_hmm_h, ctc_convert, frame_symbols, unit_symbols};

/// What to build a decoding graph from.
pub enum GraphInputs<'a> {
    /// H∘L∘G over wordpieces.
    Wordpiece { model: &'a WordpieceModel, lexicon: &'a Lexicon, lm: &'a NGramLm },
    /// A blank-free frame-level graph (for instance [`build_hmm_graph`]'s
    /// output) made CTC compatible with [`ctc_convert`].
    Chenone { graph: &'a Wfst, blank: Label },
}

pub fn build_decoding_graph(inputs: GraphInputs<'_>) -> Result<Wfst> {
    match inputs {
        GraphInputs::Wordpiece { model, lexicon, lm } => {
            let names: Vec<String> = model.pieces().iter().map(|p| p.name()).collect();
            let mut h = build_h_wordpiece(names.len())?;
            h.set_isymbols(Some(frame_symbols(&names)));
            h.set_osymbols(Some(unit_symbols(&names)));
            let l = build_l(lexicon, &unit_symbols(&names), lm.words())?;
            compose_hlg(&h, &l, lm)
        }
        GraphInputs::Chenone { graph, blank } => ctc_convert(graph, blank),
    }
}

/// Conventional H∘L∘G with one-state HMM units and no blank, to be passed
/// through [`ctc_convert`]. `unit_names[i]` names unit `i + 1`.
pub fn build_hmm_graph<S: AsRef<str>>(unit_names: &[S], lexicon: &Lexicon, lm: &NGramLm) -> Result<Wfst> {
    let mut h = build_hmm_h(unit_names.len())?;
    h.set_isymbols(Some(frame_symbols(unit_names)));
    h.set_osymbols(Some(unit_symbols(unit_names)));
    let l = build_l(lexicon, &unit_symbols(unit_names), lm.words())?;
    compose_hlg(&h, &l, lm)
}

fn compose_hlg(h: &Wfst, l: &Wfst, lm: &NGramLm) -> Result<Wfst> {
    if lm.vocabulary().next().is_none() {
        return Err(Error::EmptyGraph("language model has no words".into()));
    }
    let g = lm_to_fst(lm);
    let lg = connect(&compose(l, &g)?);
    let hlg = connect(&compose(h, &lg)?);
    if hlg.start().is_none() {
        return Err(Error::EmptyGraph("no lexicon word is accepted by the language model".into()));
    }
    info!("decoding graph: {} states, {} arcs", hlg.num_states(), hlg.num_arcs());
    Ok(hlg)
}
