//! The pipeline stages, shared by the individual subcommands and `run`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpctc_core::am::{
    forward_streaming, read_corpus, synth_generate, train, write_corpus, AmTrainReport, FeatureMatrix, ModelConfig,
    SynthSpec, ToyModel, Utterance,
};
use wpctc_core::ctc::{LabelSequence, Posteriorgram};
use wpctc_core::decoder::{word_errors, DecodeConfig, DecodeStats, Decoder, NBestList};
use wpctc_core::graph::{build_decoding_graph, GraphInputs, Lexicon, NGramLm};
use wpctc_core::streaming::{latency, StreamConfig};
use wpctc_core::wordpiece::{parse_vocab_size, train_wordpiece, TrainConfig, TrainReport, WordCounts, WordpieceModel};

use crate::artifacts::{self, create};
use crate::error::CliError;
use crate::manifest::{AmSection, ResolvedManifest};
use crate::report::{AmSummary, CorpusSummary, DecodeSummary, GraphSummary, Report, Timing, WordpieceSummary};

/// Probability mass the grammar LM reserves for ungrammatical bigrams.
pub const LM_FLOOR: f64 = 0.01;

pub struct SynthOutput {
    pub words: usize,
    pub train: usize,
    pub test: usize,
}

/// Generates a corpus and writes `train/`, `test/` and `words.txt` under
/// `corpus_dir`, and the grammar's bigram LM to `lm_path`.
pub fn synth_data(spec: &SynthSpec, test_utterances: usize, corpus_dir: &Path, lm_path: &Path) -> Result<SynthOutput> {
    let corpus = synth_generate(spec)?;
    if test_utterances >= corpus.utterances.len() {
        return Err(CliError::Config(format!(
            "cannot hold out {test_utterances} of {} utterances",
            corpus.utterances.len()
        ))
        .into());
    }
    let split = corpus.utterances.len() - test_utterances;
    write_corpus(&corpus_dir.join("train"), &corpus.utterances[..split])?;
    write_corpus(&corpus_dir.join("test"), &corpus.utterances[split..])?;
    fs::write(corpus_dir.join("words.txt"), spec.words.join("\n") + "\n")?;
    let mut w = create(lm_path)?;
    w.write_all(corpus.grammar.to_arpa(LM_FLOOR).as_bytes())?;
    w.flush()?;
    Ok(SynthOutput { words: spec.words.len(), train: split, test: test_utterances })
}

pub fn train_wp(counts: &WordCounts, vocab: &str, cfg: &TrainConfig) -> Result<(WordpieceModel, TrainReport)> {
    let size = parse_vocab_size(vocab)?;
    Ok(train_wordpiece(counts, size, cfg)?)
}

/// Wordpiece H∘L∘G. Without a lexicon, every LM word gets the Viterbi
/// segmentation of the wordpiece model.
pub fn build_wordpiece_graph(
    model: &WordpieceModel,
    lexicon: Option<Lexicon>,
    lm: &NGramLm,
) -> Result<(wpctc_core::fst::Wfst, Lexicon)> {
    let lexicon = match lexicon {
        Some(l) => l,
        None => Lexicon::from_wordpiece(model, lm.vocabulary())?,
    };
    let g = build_decoding_graph(GraphInputs::Wordpiece { model, lexicon: &lexicon, lm })?;
    Ok((g, lexicon))
}

pub fn wordpiece_targets(model: &WordpieceModel, utts: &[Utterance]) -> Result<Vec<(FeatureMatrix, LabelSequence)>> {
    utts.iter()
        .map(|u| {
            let mut units = Vec::new();
            for w in &u.words {
                units.extend(
                    model.segment_viterbi(w).with_context(|| format!("segmenting {:?} of {}", w, u.id))?.pieces,
                );
            }
            Ok((u.features.clone(), LabelSequence::new(units)?))
        })
        .collect()
}

pub fn train_am(
    data: &[(FeatureMatrix, LabelSequence)],
    units: usize,
    section: &AmSection,
    init_seed: u64,
) -> Result<(ToyModel, AmTrainReport)> {
    let input_dim =
        data.first().map(|(f, _)| f.dim()).ok_or_else(|| CliError::Data("no training utterances".into()))?;
    let cfg = ModelConfig {
        input_dim,
        context: section.context,
        stride: section.stride,
        hidden: section.hidden.clone(),
        units,
    };
    let mut model = ToyModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(init_seed))?;
    let report = train(&mut model, data, &section.train)?;
    Ok((model, report))
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub fn parallel_map<T: Sync, U: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<U> + Sync,
) -> Result<Vec<U>> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let per = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(per).map(|chunk| s.spawn(|| chunk.iter().map(&f).collect::<Result<Vec<U>>>())).collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().map_err(|_| anyhow::anyhow!("worker thread panicked"))??);
        }
        Ok(out)
    })
}

pub fn compute_posteriors(
    model: &ToyModel,
    utts: &[Utterance],
    stream: Option<StreamConfig>,
    workers: usize,
) -> Result<Vec<(String, Posteriorgram)>> {
    parallel_map(utts, workers, |u| {
        let post = match &stream {
            Some(cfg) => forward_streaming(model, &u.features, cfg)?,
            None => model.forward(&u.features)?,
        };
        Ok((u.id.clone(), post))
    })
}

pub fn decode_all(
    graph: &wpctc_core::fst::Wfst,
    posts: &[(String, Posteriorgram)],
    cfg: &DecodeConfig,
    workers: usize,
) -> Result<Vec<(NBestList, DecodeStats)>> {
    let decoder = Decoder::new(graph)?;
    parallel_map(posts, workers, |(id, p)| decoder.decode(p, cfg).with_context(|| format!("decoding {id}")))
}

pub fn write_nbest(path: &Path, ids: &[String], lists: &[NBestList]) -> Result<()> {
    let mut w = create(path)?;
    for (id, l) in ids.iter().zip(lists) {
        l.write_text(&mut w, id)?;
    }
    w.flush()?;
    Ok(())
}

pub struct Score {
    pub reference_words: usize,
    pub word_errors: usize,
    pub oracle_errors: usize,
}

impl Score {
    pub fn wer(&self) -> f64 {
        self.word_errors as f64 / self.reference_words.max(1) as f64
    }

    pub fn oracle_wer(&self) -> f64 {
        self.oracle_errors as f64 / self.reference_words.max(1) as f64
    }
}

/// Corpus-level errors of the best hypotheses and of the best hypothesis
/// in each list. An empty list counts as an empty hypothesis.
pub fn score(references: &[Vec<String>], lists: &[NBestList]) -> Score {
    let mut s = Score { reference_words: 0, word_errors: 0, oracle_errors: 0 };
    let none: Vec<String> = Vec::new();
    for (r, l) in references.iter().zip(lists) {
        s.reference_words += r.len();
        s.word_errors += word_errors(r, l.best().map_or(&none, |h| &h.words));
        s.oracle_errors += l.hypotheses.iter().map(|h| word_errors(r, &h.words)).min().unwrap_or(r.len());
    }
    s
}

/// synth-data → train-wp → build-graph → train-am → decode → score.
pub fn run_pipeline(m: &ResolvedManifest) -> Result<Report> {
    let mut timing = Timing::default();
    let mut stage = |name: &str, t: Instant| {
        let secs = t.elapsed().as_secs_f64();
        info!("stage {name} finished in {secs:.2}s");
        timing.stage_seconds.insert(name.to_string(), secs);
    };
    let mut seeds = ChaCha8Rng::seed_from_u64(m.seed);
    let synth_seed: u64 = seeds.random();
    let init_seed: u64 = seeds.random();
    let shuffle_seed: u64 = seeds.random();

    let t = Instant::now();
    let spec = SynthSpec { seed: synth_seed, ..m.synth.clone() };
    let synth = synth_data(&spec, m.test_utterances, &m.corpus, &m.lm).context("stage synth-data")?;
    stage("synth-data", t);

    let t = Instant::now();
    let train_utts = read_corpus(&m.corpus.join("train")).context("stage train-wp")?;
    let counts = wpctc_core::am::word_counts(&train_utts);
    let (wp, wp_report) = train_wp(&counts, &m.wordpiece.vocab_size, &m.wordpiece.train).context("stage train-wp")?;
    artifacts::write_wordpiece(&m.wordpiece_path, &wp)?;
    stage("train-wp", t);

    let t = Instant::now();
    let lm = artifacts::read_lm(&m.lm).context("stage build-graph")?;
    let (graph, lexicon) = build_wordpiece_graph(&wp, None, &lm).context("stage build-graph")?;
    let mut w = create(&m.lexicon)?;
    lexicon.write_text(&mut w, &artifacts::piece_symbols(&wp))?;
    w.flush()?;
    artifacts::write_graph(&m.graph, &graph)?;
    stage("build-graph", t);

    let t = Instant::now();
    let data = wordpiece_targets(&wp, &train_utts).context("stage train-am")?;
    let mut am_section = m.am.clone();
    am_section.train.seed = shuffle_seed;
    let (model, am_report) = train_am(&data, wp.num_units(), &am_section, init_seed).context("stage train-am")?;
    model.write_checkpoint(create(&m.am_path)?)?;
    stage("train-am", t);

    let t = Instant::now();
    let test_utts = read_corpus(&m.corpus.join("test")).context("stage decode")?;
    let posts = compute_posteriors(&model, &test_utts, m.stream, m.workers).context("stage decode")?;
    let results = decode_all(&graph, &posts, &m.decode, m.workers).context("stage decode")?;
    let ids: Vec<String> = test_utts.iter().map(|u| u.id.clone()).collect();
    let (lists, stats): (Vec<NBestList>, Vec<DecodeStats>) = results.into_iter().unzip();
    write_nbest(&m.nbest, &ids, &lists)?;
    stage("decode", t);

    let refs: Vec<Vec<String>> = test_utts.iter().map(|u| u.words.clone()).collect();
    let sc = score(&refs, &lists);
    let mut total = DecodeStats::default();
    stats.iter().for_each(|s| total.merge(s));
    let test_frames: usize = test_utts.iter().map(|u| u.features.frames()).sum();
    timing.audio_seconds = test_frames as f64 * m.frame_shift_ms / 1000.0;
    timing.decode_seconds = total.wall_time;
    timing.rtf = total.rtf(timing.audio_seconds);

    let report = Report {
        seed: m.seed,
        corpus: CorpusSummary {
            words: synth.words,
            train_utterances: synth.train,
            test_utterances: synth.test,
            test_frames,
        },
        wordpiece: WordpieceSummary { requested_vocab: wp_report.requested_vocab, final_vocab: wp_report.final_vocab },
        graph: GraphSummary { states: graph.num_states(), arcs: graph.num_arcs() },
        am: AmSummary {
            stride: model.config().stride,
            parameters: model.params().len(),
            epochs: am_report.epoch_losses.len(),
            steps: am_report.steps,
            initial_loss: am_report.epoch_losses.first().copied().unwrap_or(f64::NAN),
            final_loss: am_report.epoch_losses.last().copied().unwrap_or(f64::NAN),
            skipped_utterances: am_report.skipped,
        },
        decode: DecodeSummary {
            reference_words: sc.reference_words,
            word_errors: sc.word_errors,
            wer: sc.wer(),
            oracle_wer: sc.oracle_wer(),
            nbest: m.decode.nbest,
            blank_skip: m.decode.blank_skip,
            frames_total: total.frames_total,
            frames_skipped: total.frames_skipped,
            frames_skipped_fraction: total.skipped_fraction(),
            streaming: m.stream,
            latency_ms: m.stream.map(|s| latency(&s, m.frame_shift_ms)),
        },
        timing,
    };
    let mut w = create(&m.report)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report)
}

/// Keys of a report that vary between otherwise identical runs.
pub fn without_timing(report: &Report) -> BTreeMap<String, serde_json::Value> {
    let mut v: BTreeMap<String, serde_json::Value> =
        serde_json::from_value(serde_json::to_value(report).expect("report serializes")).expect("report is an object");
    v.remove("timing");
    v
}
