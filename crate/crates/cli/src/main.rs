use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wpctc_cli::artifacts::{self, create};
use wpctc_cli::bench::{bench_rtf, format_table, BenchCase};
use wpctc_cli::pipeline::{self, compute_posteriors, decode_all, score};
use wpctc_cli::{exit_code, CliError, PipelineManifest};
use wpctc_core::am::{read_corpus, word_counts, AmTrainConfig, OptimizerConfig, SynthSpec, ToyModel};
use wpctc_core::decoder::{read_nbest_text, rescore_nbest, DecodeConfig, DecodeStats, NBestList};
use wpctc_core::fst::SymbolTable;
use wpctc_core::graph::{build_decoding_graph, build_hmm_graph, unit_symbols, GraphInputs, Lexicon, BLANK_LABEL};
use wpctc_core::streaming::{latency, StreamConfig};
use wpctc_core::wordpiece::{read_corpus as read_word_counts, TrainConfig};

#[derive(Parser)]
#[command(name = "wpctc", version, about = "Wordpiece CTC training and WFST decoding on synthetic speech")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and its grammar LM.
    SynthData(SynthDataArgs),
    /// Train a unigram wordpiece model.
    TrainWp(TrainWpArgs),
    /// Build a CTC decoding graph.
    BuildGraph(BuildGraphArgs),
    /// Train the acoustic model on wordpiece targets.
    TrainAm(TrainAmArgs),
    /// Decode posteriors (or features through an acoustic model).
    Decode(DecodeArgs),
    /// Re-rank n-best lists with external scores.
    Rescore(RescoreArgs),
    /// Measure real-time factors over graphs, posterior sets and settings.
    BenchRtf(BenchArgs),
    /// Run the whole pipeline from a manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthDataArgs {
    /// Comma-separated word list of the language.
    #[arg(long, value_delimiter = ',', required = true)]
    words: Vec<String>,
    #[arg(long, default_value_t = 200)]
    utterances: usize,
    #[arg(long, default_value_t = 40)]
    test_utterances: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corpus directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the grammar's bigram ARPA model.
    #[arg(long)]
    lm: PathBuf,
}

#[derive(Args)]
struct TrainWpArgs {
    /// Vocabulary size: a number or a preset (1k, 2k, 5k, 10k, 16k).
    #[arg(long)]
    vocab_size: String,
    /// `word<TAB>count` lines, raw text, or a corpus directory.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2)]
    em_iterations: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphMode {
    Wordpiece,
    Chenone,
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long, value_enum, default_value_t = GraphMode::Wordpiece)]
    mode: GraphMode,
    /// Wordpiece model (wordpiece mode).
    #[arg(long)]
    wp: Option<PathBuf>,
    /// Unit names, one per line (chenone mode).
    #[arg(long)]
    units: Option<PathBuf>,
    /// `word unit1 unit2 ...` lines. Wordpiece mode derives one from the
    /// model when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Write the lexicon that was used.
    #[arg(long)]
    write_lexicon: Option<PathBuf>,
    #[arg(long)]
    arpa: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainAmArgs {
    /// Corpus directory with `text` and `feats/`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    wp: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value_t = 4)]
    context: usize,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Train on every subsampling phase by dropping random leading frames.
    #[arg(long)]
    random_phase: bool,
}

#[derive(Args)]
struct DecodeOpts {
    #[arg(long)]
    beam: Option<f64>,
    #[arg(long)]
    max_active: Option<usize>,
    /// Blank posterior above which frames are skipped.
    #[arg(long)]
    blank_skip: Option<f64>,
    #[arg(long, conflicts_with = "blank_skip")]
    no_blank_skip: bool,
    #[arg(long)]
    nbest: Option<usize>,
    #[arg(long)]
    acoustic_scale: Option<f64>,
}

impl DecodeOpts {
    fn apply(&self, mut cfg: DecodeConfig) -> Result<DecodeConfig> {
        if let Some(v) = self.beam {
            cfg.beam = v;
        }
        if let Some(v) = self.max_active {
            cfg.max_active = v;
        }
        if let Some(v) = self.blank_skip {
            cfg.blank_skip = Some(v);
        }
        if self.no_blank_skip {
            cfg.blank_skip = None;
        }
        if let Some(v) = self.nbest {
            cfg.nbest = v;
        }
        if let Some(v) = self.acoustic_scale {
            cfg.acoustic_scale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    graph: PathBuf,
    /// A `.pgrm` file or a directory of them.
    #[arg(long, conflicts_with_all = ["am", "features"])]
    posteriors: Option<PathBuf>,
    /// Acoustic model checkpoint, used with --features.
    #[arg(long, requires = "features")]
    am: Option<PathBuf>,
    /// Corpus directory whose features are run through --am.
    #[arg(long, requires = "am")]
    features: Option<PathBuf>,
    #[command(flatten)]
    opts: DecodeOpts,
    /// Chunked acoustic model evaluation.
    #[arg(long, requires_all = ["chunk_size", "right_context", "am"])]
    streaming: bool,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    right_context: Option<usize>,
    /// N-best output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decoding statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Save the acoustic model's posteriors as `<utt>.pgrm` files here.
    #[arg(long, requires = "am")]
    write_posteriors: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    frame_shift_ms: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct RescoreArgs {
    #[arg(long)]
    nbest: PathBuf,
    /// `utt_id score word1 word2 ...` lines.
    #[arg(long)]
    scores: PathBuf,
    /// Interpolation weight λ of the external score.
    #[arg(long)]
    weight: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transcripts (`utt_id word1 ...`) for reporting WER after rescoring.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// `LABEL:UNIT_TYPE:STRIDE:GRAPH:POSTERIORS`; repeatable.
    #[arg(long = "case", required = true)]
    cases: Vec<String>,
    /// Threshold used for the blank-skipping rows.
    #[arg(long, default_value_t = 0.99)]
    blank_skip: f64,
    #[arg(long, default_value_t = 16.0)]
    beam: f64,
    #[arg(long, default_value_t = 10.0)]
    frame_shift_ms: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    right_context: Option<usize>,
    #[command(flatten)]
    opts: DecodeOpts,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { wpctc_cli::error::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthData(a) => synth_data(a),
        Command::TrainWp(a) => train_wp(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::TrainAm(a) => train_am(a),
        Command::Decode(a) => decode(a),
        Command::Rescore(a) => rescore(a),
        Command::BenchRtf(a) => bench(a),
        Command::Run(a) => run(a),
    }
}

fn synth_data(a: SynthDataArgs) -> Result<()> {
    let spec =
        SynthSpec { words: a.words, utterances: a.utterances, noise: a.noise, seed: a.seed, ..SynthSpec::default() };
    let out = pipeline::synth_data(&spec, a.test_utterances, &a.out, &a.lm)?;
    info!("wrote {} training and {} test utterances to {}", out.train, out.test, a.out.display());
    Ok(())
}

fn train_wp(a: TrainWpArgs) -> Result<()> {
    let counts = if a.input.is_dir() {
        word_counts(&read_corpus(&a.input).with_context(|| format!("reading corpus {}", a.input.display()))?)
    } else {
        read_word_counts(&fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?)?
    };
    let cfg = TrainConfig { em_iterations: a.em_iterations, ..TrainConfig::default() };
    let (model, report) = pipeline::train_wp(&counts, &a.vocab_size, &cfg)?;
    if report.final_vocab != report.requested_vocab {
        warn!("vocabulary has {} pieces, {} requested", report.final_vocab, report.requested_vocab);
    }
    artifacts::write_wordpiece(&a.output, &model)?;
    Ok(())
}

fn read_unit_names(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.split_whitespace().map(String::from).collect())
}

fn read_lexicon(path: &Path, units: &SymbolTable) -> Result<Lexicon> {
    Lexicon::read_text(artifacts::open(path)?, units).with_context(|| format!("parsing lexicon {}", path.display()))
}

fn build_graph(a: BuildGraphArgs) -> Result<()> {
    let lm = artifacts::read_lm(&a.arpa)?;
    let (graph, lexicon, units) = match a.mode {
        GraphMode::Wordpiece => {
            let wp_path = a.wp.ok_or_else(|| CliError::Config("--mode wordpiece needs --wp".into()))?;
            let wp = artifacts::read_wordpiece(&wp_path)?;
            let units = artifacts::piece_symbols(&wp);
            let lexicon = a.lexicon.as_deref().map(|p| read_lexicon(p, &units)).transpose()?;
            let (g, lex) = pipeline::build_wordpiece_graph(&wp, lexicon, &lm)?;
            (g, lex, units)
        }
        GraphMode::Chenone => {
            let names =
                read_unit_names(&a.units.ok_or_else(|| CliError::Config("--mode chenone needs --units".into()))?)?;
            let units = unit_symbols(&names);
            let lex_path = a.lexicon.ok_or_else(|| CliError::Config("--mode chenone needs --lexicon".into()))?;
            let lexicon = read_lexicon(&lex_path, &units)?;
            let hmm = build_hmm_graph(&names, &lexicon, &lm)?;
            let g = build_decoding_graph(GraphInputs::Chenone { graph: &hmm, blank: BLANK_LABEL })?;
            (g, lexicon, units)
        }
    };
    if let Some(p) = &a.write_lexicon {
        let mut w = create(p)?;
        lexicon.write_text(&mut w, &units)?;
        w.flush()?;
    }
    artifacts::write_graph(&a.out, &graph)?;
    info!("graph: {} states, {} arcs", graph.num_states(), graph.num_arcs());
    Ok(())
}

fn train_am(a: TrainAmArgs) -> Result<()> {
    let wp = artifacts::read_wordpiece(&a.wp)?;
    let utts = read_corpus(&a.corpus).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    let data = pipeline::wordpiece_targets(&wp, &utts)?;
    let section = wpctc_cli::manifest::AmSection {
        context: a.context,
        stride: a.stride,
        hidden: a.hidden,
        train: AmTrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            optimizer: OptimizerConfig { peak_lr: a.lr, ..OptimizerConfig::default() },
            seed: a.seed,
            random_phase: a.random_phase,
        },
    };
    let mut seeds = ChaCha8Rng::seed_from_u64(a.seed);
    let (model, report) = pipeline::train_am(&data, wp.num_units(), &section, rand::Rng::random(&mut seeds))?;
    if report.skipped > 0 {
        warn!("{} of {} utterances skipped as infeasible at stride {}", report.skipped, data.len(), a.stride);
    }
    model.write_checkpoint(create(&a.out)?)?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let cfg = a.opts.apply(DecodeConfig::default())?;
    let graph = artifacts::read_graph(&a.graph)?;
    let stream = if a.streaming {
        Some(StreamConfig::new(a.chunk_size.unwrap_or_default(), a.right_context.unwrap_or_default())?)
    } else {
        None
    };
    let (posts, input_stride) = match (&a.posteriors, &a.am, &a.features) {
        (Some(p), _, _) => (artifacts::read_posteriors(p)?, 1),
        (None, Some(am), Some(feats)) => {
            let model = ToyModel::read_checkpoint(artifacts::open(am)?)?;
            let utts = read_corpus(feats).with_context(|| format!("reading corpus {}", feats.display()))?;
            (compute_posteriors(&model, &utts, stream, a.workers)?, model.config().stride)
        }
        _ => return Err(CliError::Config("give --posteriors, or --am with --features".into()).into()),
    };
    if let Some(dir) = &a.write_posteriors {
        artifacts::write_posteriors(dir, &posts)?;
    }
    let results = decode_all(&graph, &posts, &cfg, a.workers)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut total = DecodeStats::default();
    for ((id, _), (list, stats)) in posts.iter().zip(&results) {
        list.write_text(&mut out, id)?;
        total.merge(stats);
    }
    out.flush()?;
    if let Some(p) = &a.stats {
        let frames: usize = posts.iter().map(|(_, p)| p.frames()).sum();
        let audio = (frames * input_stride) as f64 * a.frame_shift_ms / 1000.0;
        let json = serde_json::json!({
            "utterances": posts.len(),
            "frames_total": total.frames_total,
            "frames_skipped": total.frames_skipped,
            "frames_skipped_fraction": total.skipped_fraction(),
            "tokens_expanded": total.tokens_expanded,
            "decode_seconds": total.wall_time,
            "audio_seconds": audio,
            "rtf": total.rtf(audio),
            "latency_ms": stream.map(|s| latency(&s, a.frame_shift_ms)),
        });
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &json)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn rescore(a: RescoreArgs) -> Result<()> {
    let lists = read_nbest_text(artifacts::open(&a.nbest)?)?;
    let mut external: HashMap<String, HashMap<String, f64>> = HashMap::new();
    for (i, line) in fs::read_to_string(&a.scores)?.lines().enumerate() {
        let mut f = line.split_whitespace();
        let Some(utt) = f.next() else { continue };
        let score: f64 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Data(format!("{}:{}: expected a score", a.scores.display(), i + 1)))?;
        external.entry(utt.to_string()).or_default().insert(f.collect::<Vec<_>>().join(" "), score);
    }
    let empty = HashMap::new();
    let mut rescored: Vec<(String, NBestList)> = Vec::with_capacity(lists.len());
    for (utt, list) in &lists {
        let scores = external.get(utt).unwrap_or(&empty);
        rescored
            .push((utt.clone(), rescore_nbest(list, scores, a.weight).with_context(|| format!("rescoring {utt}"))?));
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    for (utt, list) in &rescored {
        list.write_text(&mut out, utt)?;
    }
    out.flush()?;
    if let Some(r) = &a.reference {
        let refs: HashMap<String, Vec<String>> = artifacts::read_transcripts(r)?.into_iter().collect();
        let (mut refs_v, mut lists_v) = (Vec::new(), Vec::new());
        for (utt, list) in rescored {
            let words = refs.get(&utt).ok_or_else(|| CliError::Data(format!("no reference for {utt}")))?;
            refs_v.push(words.clone());
            lists_v.push(list);
        }
        let s = score(&refs_v, &lists_v);
        info!("WER {:.4} ({} / {} words), oracle WER {:.4}", s.wer(), s.word_errors, s.reference_words, s.oracle_wer());
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut graphs = Vec::new();
    let mut specs = Vec::new();
    for c in &a.cases {
        let parts: Vec<&str> = c.splitn(5, ':').collect();
        let [label, unit_type, stride, graph, posts] = parts[..] else {
            return Err(CliError::Config(format!("--case {c:?} is not LABEL:UNIT_TYPE:STRIDE:GRAPH:POSTERIORS")).into());
        };
        let stride: usize = stride.parse().map_err(|_| CliError::Config(format!("bad stride in --case {c:?}")))?;
        graphs.push(artifacts::read_graph(Path::new(graph))?);
        specs.push((label.to_string(), unit_type.to_string(), stride, artifacts::read_posteriors(Path::new(posts))?));
    }
    let cases: Vec<BenchCase<'_>> = specs
        .into_iter()
        .zip(&graphs)
        .map(|((label, unit_type, stride, posteriors), graph)| BenchCase {
            label,
            unit_type,
            stride,
            graph,
            posteriors,
        })
        .collect();
    let base = DecodeConfig { beam: a.beam, ..DecodeConfig::default() };
    let configs = [DecodeConfig { blank_skip: None, ..base }, DecodeConfig { blank_skip: Some(a.blank_skip), ..base }];
    for c in &configs {
        c.validate()?;
    }
    let rows = bench_rtf(&cases, &configs, a.frame_shift_ms, a.workers)?;
    print!("{}", format_table(&rows));
    if let Some(p) = &a.json {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut m = PipelineManifest::from_file(&a.manifest)?;
    if let Some(w) = a.work_dir {
        m.work_dir = Some(w);
    }
    if a.seed.is_some() {
        m.seed = a.seed;
    }
    if a.workers.is_some() {
        m.workers = a.workers;
    }
    if let Some(s) = a.stride {
        m.am.stride = s;
    }
    match (a.chunk_size, a.right_context) {
        (Some(cs), rc) => m.stream = Some(StreamConfig { chunk_size: cs, right_context: rc.unwrap_or(0) }),
        (None, Some(_)) => return Err(CliError::Config("--right-context needs --chunk-size".into()).into()),
        (None, None) => {}
    }
    m.decode = a.opts.apply(m.decode).map_err(|e| CliError::Config(e.to_string()))?;
    let resolved = m.resolve()?;
    let report = pipeline::run_pipeline(&resolved)?;
    println!(
        "WER {:.4} ({} / {} words)  oracle WER {:.4}  RTF {:.4}  frames skipped {:.1}%",
        report.decode.wer,
        report.decode.word_errors,
        report.decode.reference_words,
        report.decode.oracle_wer,
        report.timing.rtf,
        100.0 * report.decode.frames_skipped_fraction
    );
    info!("report written to {}", resolved.report.display());
    Ok(())
}
