//! Real-time-factor benchmark over graphs, posterior sets and decoder
//! settings.

use std::fmt::Write as _;

use anyhow::Result;
use serde::Serialize;
use wpctc_core::ctc::Posteriorgram;
use wpctc_core::decoder::{DecodeConfig, DecodeStats};
use wpctc_core::fst::Wfst;

use crate::pipeline::decode_all;

pub struct BenchCase<'a> {
    pub label: String,
    pub unit_type: String,
    /// Input frames per posteriorgram frame.
    pub stride: usize,
    pub graph: &'a Wfst,
    pub posteriors: Vec<(String, Posteriorgram)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub unit_type: String,
    pub stride: usize,
    pub blank_skip: Option<f64>,
    pub utterances: usize,
    pub frames_decoded: usize,
    pub frames_skipped: usize,
    pub skipped_percent: f64,
    pub tokens_expanded: u64,
    pub decode_seconds: f64,
    pub audio_seconds: f64,
    pub rtf: f64,
}

/// Decodes every case under every config. Audio duration is
/// `frames × stride × frame_shift_ms`; decode time sums the per-utterance
/// search times, so it does not depend on `workers`.
pub fn bench_rtf(
    cases: &[BenchCase<'_>],
    configs: &[DecodeConfig],
    frame_shift_ms: f64,
    workers: usize,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for case in cases {
        let frames: usize = case.posteriors.iter().map(|(_, p)| p.frames()).sum();
        let audio_seconds = (frames * case.stride) as f64 * frame_shift_ms / 1000.0;
        for cfg in configs {
            let mut total = DecodeStats::default();
            for (_, s) in decode_all(case.graph, &case.posteriors, cfg, workers)? {
                total.merge(&s);
            }
            rows.push(BenchRow {
                label: case.label.clone(),
                unit_type: case.unit_type.clone(),
                stride: case.stride,
                blank_skip: cfg.blank_skip,
                utterances: case.posteriors.len(),
                frames_decoded: total.frames_total - total.frames_skipped,
                frames_skipped: total.frames_skipped,
                skipped_percent: 100.0 * total.skipped_fraction(),
                tokens_expanded: total.tokens_expanded,
                decode_seconds: total.wall_time,
                audio_seconds,
                rtf: total.rtf(audio_seconds),
            });
        }
    }
    Ok(rows)
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:<16} {:<10} {:>6} {:>10} {:>10} {:>9} {:>12} {:>10}\n",
        "case", "units", "stride", "skip", "decoded", "skipped%", "tokens", "rtf"
    );
    for r in rows {
        let skip = r.blank_skip.map_or("off".to_string(), |t| format!("{t}"));
        writeln!(
            s,
            "{:<16} {:<10} {:>6} {:>10} {:>10} {:>9.1} {:>12} {:>10.5}",
            r.label, r.unit_type, r.stride, skip, r.frames_decoded, r.skipped_percent, r.tokens_expanded, r.rtf
        )
        .unwrap();
    }
    s
}
