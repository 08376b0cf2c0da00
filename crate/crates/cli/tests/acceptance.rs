//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wpctc_cli::bench::{bench_rtf, BenchCase};
use wpctc_cli::pipeline::{build_wordpiece_graph, train_wp, LM_FLOOR};
use wpctc_cli::PipelineManifest;
use wpctc_core::am::{synth_generate, ModelConfig, ToyModel};
use wpctc_core::ctc::{collapse, ctc_loss, AlignmentPath, LabelSequence, Posteriorgram, Unit};
use wpctc_core::decoder::{decode, DecodeConfig, Decoder};
use wpctc_core::fst::{compose, connect, shortest_path, Arc, Label, Semiring, Wfst, EPSILON};
use wpctc_core::graph::{build_h_wordpiece, ctc_convert, lm_to_fst, parse_arpa, unit_label, Lexicon};
use wpctc_core::streaming::{stream, ChunkEncoder, MovingAverage, StreamConfig};
use wpctc_core::wordpiece::{train_wordpiece, TrainConfig, UnigramTrainer, WordCounts, WordpieceModel};
use wpctc_testkit::ctc::{central_differences, ctc_nll_brute_force};
use wpctc_testkit::decoder::exhaustive_decode;
use wpctc_testkit::fst::{language, random_fst, Language, RandomFstSpec};
use wpctc_testkit::lm::{random_lm, random_sentence};
use wpctc_testkit::wordpiece::best_split;
use wpctc_testkit::{max_rel_err, rng};

fn demo_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/manifest.toml")
}

fn normal_post<R: Rng>(r: &mut R, frames: usize, units: usize, scale: f64) -> Posteriorgram {
    let scores = (0..frames * units)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            scale * z
        })
        .collect();
    Posteriorgram::from_scores(frames, units, scores).unwrap()
}

fn linear(labels: &[Label]) -> Wfst {
    let mut g = Wfst::new(Semiring::Tropical);
    g.add_states(labels.len() + 1);
    g.set_start(0);
    for (i, &l) in labels.iter().enumerate() {
        g.add_arc(i as u32, Arc::new(l, l, 0.0, i as u32 + 1));
    }
    g.set_final(labels.len() as u32, 0.0);
    g
}

fn ctc_loss_vs_brute_force() -> Result<String> {
    let started = Instant::now();
    let mut r = rng(1001);
    let (mut cases, mut infeasible, mut worst) = (0, 0, 0.0f64);
    while cases < 600 {
        let frames = r.random_range(1..=6);
        let units = r.random_range(2..=4);
        let len = r.random_range(0..=3);
        let target: Vec<u32> = (0..len).map(|_| r.random_range(1..units as u32)).collect();
        let post = normal_post(&mut r, frames, units, 1.5);
        let out = ctc_loss(&post, &LabelSequence::new(target.clone())?)?;
        let oracle = ctc_nll_brute_force(&post, &target);
        if oracle.is_infinite() {
            ensure!(out.loss.is_infinite() && !out.feasible, "T={frames} y={target:?} should be infeasible");
            infeasible += 1;
        } else {
            let diff = (out.loss - oracle).abs();
            ensure!(diff < 1e-9, "T={frames} V={units} y={target:?}: {} vs {oracle}", out.loss);
            worst = worst.max(diff);
        }
        cases += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{cases} cases ({infeasible} infeasible), max |diff| {worst:.1e}, {secs:.2} s"))
}

fn ctc_gradient_vs_finite_differences() -> Result<String> {
    let mut r = rng(1002);
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let post = normal_post(&mut r, 5, 4, 1.5);
        let len = r.random_range(1..=3);
        let target = LabelSequence::new((0..len).map(|_| r.random_range(1..4)).collect())?;
        let analytic = ctc_loss(&post, &target)?.grad;
        let numeric = central_differences(post.as_slice(), 1e-5, |x| {
            let p = Posteriorgram::new_unchecked(5, 4, x.to_vec()).unwrap();
            ctc_loss(&p, &target).unwrap().loss
        });
        let err = max_rel_err(&analytic, &numeric, 1e-4);
        ensure!(err < 1e-4, "target {target:?}: relative error {err}");
        worst = worst.max(err);
    }
    Ok(format!("60 posteriorgrams 5x4, max relative error {worst:.1e}"))
}

fn ctc_convert_structure_and_language() -> Result<String> {
    let mut r = rng(1003);
    let mut strings = 0;
    for case in 0..120 {
        let spec = RandomFstSpec {
            states: r.random_range(1..=6),
            labels: 3,
            max_arcs_per_state: 3,
            input_epsilon_prob: if case % 2 == 0 { 0.0 } else { 0.15 },
            ..Default::default()
        };
        let g = random_fst(&mut r, &spec);
        let blank = spec.labels + 1;
        let c = ctc_convert(&g, blank)?;
        ensure!(c.num_states() == 2 * g.num_states(), "case {case}: {} states", c.num_states());
        ensure!(c.num_arcs() == g.num_arcs() + 2 * g.num_states(), "case {case}: {} arcs", c.num_arcs());
        let original = language(&g, 5, 5);
        let mut deleted = Language::new();
        for ((input, output), w) in language(&c, 5, 5) {
            let stripped: Vec<Label> = input.into_iter().filter(|&l| l != blank).collect();
            let e = deleted.entry((stripped, output)).or_insert(f64::INFINITY);
            *e = e.min(w);
        }
        for (key, w) in &deleted {
            let o = original.get(key);
            ensure!(o.is_some_and(|o| (o - w).abs() < 1e-9), "case {case}: {key:?} {w} vs {o:?}");
        }
        ensure!(deleted.len() == original.len(), "case {case}: {} vs {} strings", deleted.len(), original.len());
        strings += original.len();
    }
    Ok(format!("120 FSTs, {strings} (input, output) pairs compared"))
}

fn h_transduction_is_collapse() -> Result<String> {
    fn rec(h: &Wfst, cur: &mut Vec<Unit>, checked: &mut usize) -> Result<()> {
        let input: Vec<Label> = cur.iter().map(|&u| unit_label(u)).collect();
        let lang = language(&connect(&compose(&linear(&input), h)?), 6, 6);
        let expected = collapse(&AlignmentPath(cur.clone())).into_inner();
        let outputs: Vec<&Vec<Label>> = lang.keys().map(|(_, o)| o).collect();
        ensure!(outputs == vec![&expected], "frames {cur:?} give {outputs:?}");
        *checked += 1;
        if cur.len() < 6 {
            for u in 0..4 {
                cur.push(u);
                rec(h, cur, checked)?;
                cur.pop();
            }
        }
        Ok(())
    }
    let h = build_h_wordpiece(3)?;
    let mut checked = 0;
    rec(&h, &mut Vec::new(), &mut checked)?;
    ensure!(checked == (0..=6).map(|n| 4usize.pow(n)).sum::<usize>());
    Ok(format!("{checked} frame strings over blank + 3 units, zero mismatches"))
}

fn random_decoding_graph<R: Rng>(r: &mut R, units: u32) -> Wfst {
    loop {
        let spec = RandomFstSpec {
            states: r.random_range(1..=8),
            labels: units,
            max_arcs_per_state: 3,
            input_epsilon_prob: 0.15,
            output_epsilon_prob: 0.5,
            ..Default::default()
        };
        let g = random_fst(r, &spec);
        if !g.has_cycle_where(|a| a.ilabel == EPSILON) {
            return g;
        }
    }
}

fn decoder_vs_exhaustive_search() -> Result<String> {
    let mut r = rng(1005);
    let exact = DecodeConfig { beam: f64::INFINITY, max_active: usize::MAX, blank_skip: None, ..Default::default() };
    let (mut compared, mut empty) = (0, 0);
    while compared < 250 {
        let units = r.random_range(2..=4u32);
        let g = random_decoding_graph(&mut r, units);
        let frames = r.random_range(1..=6);
        let post = normal_post(&mut r, frames, units as usize, 2.0);
        let oracle = exhaustive_decode(&g, &post, 1.0);
        let (nbest, _) = decode(&post, &g, &exact)?;
        let Some((words, cost)) = oracle.iter().min_by(|a, b| a.1.total_cmp(b.1)) else {
            ensure!(nbest.is_empty(), "decoder found a path exhaustive search did not");
            empty += 1;
            continue;
        };
        let best = nbest.best().context("no hypothesis")?;
        ensure!((best.score - cost).abs() < 1e-6, "score {} vs {cost}", best.score);
        // an equal-cost word sequence is an equally correct answer
        if best.word_ids != *words {
            ensure!((oracle[&best.word_ids] - cost).abs() < 1e-9, "{:?} vs {words:?}", best.word_ids);
        }
        compared += 1;
    }
    Ok(format!("{compared} cases with a path, {empty} without, scores within 1e-6"))
}

/// The demo's wordpiece H∘L∘G plus its lexicon, model and sentences.
struct DemoGraph {
    graph: Wfst,
    model: WordpieceModel,
    lexicon: Lexicon,
    sentences: Vec<Vec<String>>,
}

fn demo_graph() -> Result<DemoGraph> {
    let manifest = PipelineManifest::from_file(&demo_manifest())?;
    let corpus = synth_generate(&manifest.synth)?;
    let lm = parse_arpa(&corpus.grammar.to_arpa(LM_FLOOR))?;
    let (model, _) = train_wp(&corpus.word_counts(), &manifest.wordpiece.vocab_size, &manifest.wordpiece.train)?;
    let (graph, lexicon) = build_wordpiece_graph(&model, None, &lm)?;
    let sentences = corpus.utterances.into_iter().map(|u| u.words).collect();
    Ok(DemoGraph { graph, model, lexicon, sentences })
}

/// Each unit gets one peaked frame (blank below 0.1) followed by a run of
/// three to six blank frames. Run frames are one-hot blank with
/// probability 0.8 and otherwise blank at 0.995 with the rest spread over
/// the other units.
fn blank_dominant_posteriors<R: Rng>(r: &mut R, demo: &DemoGraph, words: &[String]) -> (Posteriorgram, usize) {
    let units = demo.model.num_units();
    let mut data = Vec::new();
    let mut one_hot = 0;
    let mut blank_run = |r: &mut R, data: &mut Vec<f64>| {
        for _ in 0..r.random_range(3..=6) {
            if r.random_bool(0.8) {
                data.push(0.0);
                data.extend(std::iter::repeat_n(f64::NEG_INFINITY, units - 1));
                one_hot += 1;
            } else {
                data.push(0.995f64.ln());
                data.extend(std::iter::repeat_n((0.005 / (units - 1) as f64).ln(), units - 1));
            }
        }
    };
    blank_run(r, &mut data);
    for w in words {
        for &u in &demo.lexicon.pronunciations(w).unwrap()[0] {
            let mut row: Vec<f64> = (0..units).map(|_| r.random_range(-4.0..-1.0)).collect();
            row[0] = -4.0;
            row[u as usize] = 3.0;
            let z = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            data.extend(row.iter().map(|v| v - z));
            blank_run(r, &mut data);
        }
    }
    let frames = data.len() / units;
    (Posteriorgram::new(frames, units, data).unwrap(), one_hot)
}

fn time_decodes(
    decoder: &Decoder,
    posts: &[Posteriorgram],
    cfg: &DecodeConfig,
) -> Result<(Duration, Vec<Vec<Label>>, usize)> {
    let mut best = Duration::MAX;
    let mut words = Vec::new();
    let mut skipped = 0;
    for _ in 0..3 {
        words.clear();
        skipped = 0;
        let started = Instant::now();
        for p in posts {
            let (nbest, stats) = decoder.decode(p, cfg)?;
            words.push(nbest.best().map(|h| h.word_ids.clone()).unwrap_or_default());
            skipped += stats.frames_skipped;
        }
        best = best.min(started.elapsed());
    }
    Ok((best, words, skipped))
}

fn blank_skipping() -> Result<String> {
    let demo = demo_graph()?;
    let mut r = rng(1006);
    let mut posts = Vec::new();
    let (mut frames, mut blanks) = (0, 0);
    for _ in 0..400 {
        let sentence = demo.sentences.choose(&mut r).unwrap().clone();
        let (p, b) = blank_dominant_posteriors(&mut r, &demo, &sentence);
        frames += p.frames();
        blanks += b;
        posts.push(p);
    }
    let blank_share = blanks as f64 / frames as f64;
    ensure!(blank_share >= 0.6, "only {:.1}% one-hot blank frames", 100.0 * blank_share);
    let decoder = Decoder::new(&demo.graph)?;
    let (t_off, words_off, _) =
        time_decodes(&decoder, &posts, &DecodeConfig { blank_skip: None, ..Default::default() })?;
    let (t_on, words_on, skipped) =
        time_decodes(&decoder, &posts, &DecodeConfig { blank_skip: Some(0.99), ..Default::default() })?;
    let skipped_share = skipped as f64 / frames as f64;
    let speedup = t_off.as_secs_f64() / t_on.as_secs_f64();
    let changed = words_off.iter().zip(&words_on).filter(|(a, b)| a != b).count();
    ensure!(skipped_share > 0.5, "skipped {:.1}% of frames", 100.0 * skipped_share);
    ensure!(changed == 0, "{changed} of {} utterances changed words", posts.len());
    ensure!(speedup >= 1.5, "wall time {:?} -> {:?} is only {speedup:.2}x", t_off, t_on);
    Ok(format!(
        "{} utterances, {:.1}% one-hot blank, {:.1}% skipped, words unchanged, {:.1} ms -> {:.1} ms ({speedup:.2}x)",
        posts.len(),
        100.0 * blank_share,
        100.0 * skipped_share,
        1e3 * t_off.as_secs_f64(),
        1e3 * t_on.as_secs_f64()
    ))
}

fn stride_ladder() -> Result<String> {
    let demo = demo_graph()?;
    let manifest = PipelineManifest::from_file(&demo_manifest())?;
    let corpus = synth_generate(&manifest.synth)?;
    let feats: Vec<_> = corpus.utterances.iter().map(|u| u.features.clone()).collect();
    let units = demo.model.num_units();
    let strides = [2usize, 4, 8];
    let mut posts = Vec::new();
    for (i, &stride) in strides.iter().enumerate() {
        let cfg = ModelConfig { input_dim: feats[0].dim(), context: 4, stride, hidden: vec![32], units };
        let model = ToyModel::new(cfg, &mut <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(i as u64))?;
        let p: Vec<(String, Posteriorgram)> =
            feats.iter().enumerate().map(|(j, f)| Ok((format!("u{j}"), model.forward(f)?))).collect::<Result<_>>()?;
        for ((_, post), f) in p.iter().zip(&feats) {
            ensure!(post.frames() == f.frames().div_ceil(stride), "stride {stride}: {} frames", post.frames());
        }
        posts.push(p);
    }
    for w in posts.windows(2) {
        for ((_, a), (_, b)) in w[0].iter().zip(&w[1]) {
            ensure!(a.frames().abs_diff(2 * b.frames()) <= 1, "{} vs {} frames", a.frames(), b.frames());
        }
    }
    let cases: Vec<BenchCase> = strides
        .iter()
        .zip(posts)
        .map(|(&stride, posteriors)| BenchCase {
            label: format!("s{stride}"),
            unit_type: "wordpiece".into(),
            stride,
            graph: &demo.graph,
            posteriors,
        })
        .collect();
    let cfg = DecodeConfig { blank_skip: None, max_active: 2000, ..Default::default() };
    let mut best_rtf = vec![f64::INFINITY; strides.len()];
    let mut decoded = vec![0; strides.len()];
    for _ in 0..3 {
        for (i, row) in bench_rtf(&cases, std::slice::from_ref(&cfg), 10.0, 1)?.iter().enumerate() {
            best_rtf[i] = best_rtf[i].min(row.rtf);
            decoded[i] = row.frames_decoded;
        }
    }
    ensure!(best_rtf.windows(2).all(|w| w[1] < w[0]), "RTF not decreasing: {best_rtf:?}");
    Ok(format!(
        "frames decoded {}:{}:{} over {} utterances (each within 1 of 2x the next), RTF {:.5} > {:.5} > {:.5}",
        decoded[0],
        decoded[1],
        decoded[2],
        feats.len(),
        best_rtf[0],
        best_rtf[1],
        best_rtf[2]
    ))
}

fn syllable_corpus<R: Rng>(r: &mut R, words: usize, alphabet: &[char]) -> WordCounts {
    let syllables: Vec<String> =
        (0..6).map(|_| (0..r.random_range(1..=3)).map(|_| *alphabet.choose(r).unwrap()).collect()).collect();
    let mut counts = WordCounts::new();
    while counts.len() < words {
        let w: String = (0..r.random_range(1..=4)).map(|_| syllables.choose(r).unwrap().as_str()).collect();
        if w.chars().count() <= 10 {
            *counts.entry(w).or_default() += r.random_range(1..20);
        }
    }
    counts
}

fn wordpiece_trainer() -> Result<String> {
    let mut r = rng(1008);
    let mut em_steps = 0;
    for _ in 0..5 {
        let corpus = syllable_corpus(&mut r, 30, &['a', 'b', 'c', 'd', 'e']);
        let mut t = UnigramTrainer::new(&corpus, 25, &TrainConfig::default())?;
        while t.vocab_size() > 25 {
            let mut prev = f64::NEG_INFINITY;
            for _ in 0..4 {
                let ll = t.em_step();
                ensure!(ll >= prev - 1e-9, "EM went from {prev} to {ll}");
                prev = ll;
                em_steps += 1;
            }
            t.prune(25, 0.2);
        }
    }

    let corpus = syllable_corpus(&mut r, 60, &['a', 'b', 'c', 'd']);
    let (model, _) = train_wordpiece(&corpus, 30, &TrainConfig::default())?;
    let single = |start: bool| -> Vec<char> {
        model
            .pieces()
            .iter()
            .filter(|p| p.word_start == start && p.text.chars().count() == 1)
            .map(|p| p.text.chars().next().unwrap())
            .collect()
    };
    let (initial, inner) = (single(true), single(false));
    for _ in 0..300 {
        let len = r.random_range(1..=10);
        let word: String = std::iter::once(*initial.choose(&mut r).unwrap())
            .chain((1..len).map(|_| *inner.choose(&mut r).unwrap()))
            .collect();
        let oracle = best_split(&model, &word).context("no split")?;
        let got = model.viterbi_score(&word)?;
        ensure!((got - oracle).abs() < 1e-9, "{word}: {got} vs {oracle}");
        let seg = model.segment_viterbi(&word)?;
        let sum: f64 = seg.pieces.iter().map(|&u| model.piece(u).unwrap().log_prob).sum();
        ensure!((sum - oracle).abs() < 1e-9, "{word}: segmentation scores {sum}");
    }

    let hello = WordpieceModel::from_names(&[
        ("_he", -1.0),
        ("ll", -1.0),
        ("o", -1.0),
        ("_h", -3.0),
        ("e", -3.0),
        ("l", -3.0),
    ])?;
    let pieces = hello.render(&hello.segment_viterbi("hello")?.pieces).join(" ");
    ensure!(pieces == "_he ll o", "hello -> {pieces}");
    Ok(format!("{em_steps} EM steps monotone, 300 words match exhaustive splits, hello -> {pieces}"))
}

/// Leaky running sum carried through state, plus the next `reach` frames.
struct LeakyLookahead {
    reach: usize,
}

impl ChunkEncoder for LeakyLookahead {
    type State = Vec<f64>;

    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    fn right_reach(&self) -> usize {
        self.reach
    }

    fn process(&self, chunk: &[Vec<f64>], state: &Vec<f64>, keep: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut h = if state.is_empty() { vec![0.0; chunk[0].len()] } else { state.clone() };
        let mut at_keep = h.clone();
        let mut out = Vec::with_capacity(chunk.len());
        for (t, x) in chunk.iter().enumerate() {
            for (hi, xi) in h.iter_mut().zip(x) {
                *hi = 0.7 * *hi + xi;
            }
            let mut y = h.clone();
            for f in chunk.iter().skip(t + 1).take(self.reach) {
                for (yi, fi) in y.iter_mut().zip(f) {
                    *yi += fi;
                }
            }
            out.push(y);
            if t + 1 == keep {
                at_keep = h.clone();
            }
        }
        (out, at_keep)
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

fn streaming_equivalence() -> Result<String> {
    let mut r = rng(1009);
    let (mut configs, mut runs, mut worst) = (0, 0, 0.0f64);
    for cs in 1..=10 {
        for rc in 0..cs {
            configs += 1;
            let cfg = StreamConfig::new(cs, rc)?;
            for len in 1..=50 {
                let x: Vec<Vec<f64>> =
                    (0..len).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
                for reach in 0..=rc {
                    let avg = MovingAverage { left: r.random_range(0..4), right: reach };
                    let got = stream(&x, &avg, &cfg)?;
                    ensure!(got.len() == len, "CS={cs} RC={rc} T={len}: {} outputs", got.len());
                    let d1 = max_abs_diff(&got, &avg.apply(&x));
                    let leaky = LeakyLookahead { reach };
                    let got = stream(&x, &leaky, &cfg)?;
                    ensure!(got.len() == len, "CS={cs} RC={rc} T={len}: {} outputs", got.len());
                    let d2 = max_abs_diff(&got, &leaky.process(&x, &Vec::new(), len).0);
                    ensure!(d1.max(d2) < 1e-6, "CS={cs} RC={rc} r={reach} T={len}: diff {}", d1.max(d2));
                    worst = worst.max(d1).max(d2);
                    runs += 2;
                }
            }
        }
    }
    Ok(format!("{configs} CS/RC configs, lengths 1..50, {runs} runs, max diff {worst:.1e}"))
}

fn run_demo(work_dir: &Path) -> Result<(Duration, serde_json::Value)> {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_wpctc"))
        .args(["run", "--manifest"])
        .arg(demo_manifest())
        .arg("--work-dir")
        .arg(work_dir)
        .env("RUST_LOG", "warn")
        .output()?;
    let elapsed = started.elapsed();
    if !out.status.success() {
        bail!("wpctc run failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(work_dir.join("report.json"))?)?;
    Ok((elapsed, report))
}

fn artifacts(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "report.json") {
                files.insert(path.strip_prefix(dir)?.to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(files)
}

fn end_to_end_demo() -> Result<String> {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let (elapsed, mut first) = run_demo(a.path())?;
    let (_, mut second) = run_demo(b.path())?;
    let wer = first["decode"]["wer"].as_f64().context("report has no decode.wer")?;
    let words = first["corpus"]["words"].as_u64().context("report has no corpus.words")?;
    let utterances = first["corpus"]["train_utterances"].as_u64().unwrap_or(0)
        + first["corpus"]["test_utterances"].as_u64().unwrap_or(0);
    let stride = first["am"]["stride"].as_u64().context("report has no am.stride")?;
    ensure!(words == 20 && stride == 4, "{words} words at stride {stride}");
    ensure!(wer < 0.05, "WER {wer:.4}");
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    let (fa, fb) = (artifacts(a.path())?, artifacts(b.path())?);
    ensure!(fa.keys().eq(fb.keys()), "reruns wrote different files");
    for (name, bytes) in &fa {
        ensure!(fb[name] == *bytes, "{} differs between runs", name.display());
    }
    first.as_object_mut().unwrap().remove("timing");
    second.as_object_mut().unwrap().remove("timing");
    ensure!(first == second, "reports differ outside timing");
    Ok(format!(
        "{words} words, {utterances} utterances, stride {stride}: held-out WER {:.2}% ({} / {} words), {:.1} s; rerun byte-identical across {} files",
        100.0 * wer,
        first["decode"]["word_errors"],
        first["decode"]["reference_words"],
        elapsed.as_secs_f64(),
        fa.len()
    ))
}

fn arpa_fidelity() -> Result<String> {
    let mut r = rng(1011);
    let mut sentences = 0;
    let mut worst = 0.0f64;
    for order in 1..=3 {
        for _ in 0..4 {
            let reference = random_lm(&mut r, 5, order, 0.5);
            let lm = parse_arpa(&reference.to_arpa())?;
            let g = lm_to_fst(&lm);
            for _ in 0..10 {
                let sentence = random_sentence(&mut r, &reference, 6);
                let words: Vec<&str> = sentence.iter().map(String::as_str).collect();
                let expected = reference.sentence_ln(&words);
                let labels: Vec<Label> = words.iter().map(|w| lm.words().find(w).unwrap()).collect();
                let best = shortest_path(&compose(&linear(&labels), &g)?, 1)?;
                let got = -best.first().context("sentence rejected")?.weight;
                ensure!((got - expected).abs() < 1e-6, "order {order} {words:?}: {got} vs {expected}");
                worst = worst.max((got - expected).abs());
                sentences += 1;
            }
        }
    }
    Ok(format!("{sentences} sentences from orders 1-3, max |diff| {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Result<String>); 11] = [
        ("CTC loss equals brute-force enumeration", ctc_loss_vs_brute_force),
        ("CTC gradient equals finite differences", ctc_gradient_vs_finite_differences),
        ("ctc_convert shape and blank-deleted language", ctc_convert_structure_and_language),
        ("H transduction equals collapse", h_transduction_is_collapse),
        ("infinite-beam decoder equals exhaustive search", decoder_vs_exhaustive_search),
        ("blank skipping", blank_skipping),
        ("stride ladder", stride_ladder),
        ("wordpiece trainer", wordpiece_trainer),
        ("streaming equals full-sequence evaluation", streaming_equivalence),
        ("end-to-end demo", end_to_end_demo),
        ("ARPA G equals backoff interpreter", arpa_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(anyhow::anyhow!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {:2} {name}: {e:#} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
