//! The JSON run report. Its shape is described by `docs/report.schema.json`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wpctc_core::streaming::StreamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub corpus: CorpusSummary,
    pub wordpiece: WordpieceSummary,
    pub graph: GraphSummary,
    pub am: AmSummary,
    pub decode: DecodeSummary,
    /// Everything that depends on wall-clock time.
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub words: usize,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub test_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordpieceSummary {
    pub requested_vocab: usize,
    pub final_vocab: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub states: usize,
    pub arcs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmSummary {
    pub stride: usize,
    pub parameters: usize,
    pub epochs: usize,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Training utterances whose target cannot fit at this stride.
    pub skipped_utterances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeSummary {
    pub reference_words: usize,
    pub word_errors: usize,
    pub wer: f64,
    pub oracle_wer: f64,
    pub nbest: usize,
    pub blank_skip: Option<f64>,
    pub frames_total: usize,
    pub frames_skipped: usize,
    pub frames_skipped_fraction: f64,
    pub streaming: Option<StreamConfig>,
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage_seconds: BTreeMap<String, f64>,
    pub decode_seconds: f64,
    pub audio_seconds: f64,
    pub rtf: f64,
}
