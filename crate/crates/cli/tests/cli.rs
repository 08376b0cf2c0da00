use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use wpctc_core::ctc::Posteriorgram;
use wpctc_testkit::rng;

const WORDS: &str = "hello,world,green,river,stone,apple";

fn wpctc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpctc")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = wpctc(args);
    assert!(out.status.success(), "wpctc {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Same utterances, ranks and words; scores within `tol`.
fn assert_same_nbest(a: &str, b: &str, tol: f64) {
    assert_eq!(a.lines().count(), b.lines().count());
    for (x, y) in a.lines().zip(b.lines()) {
        let (fx, fy): (Vec<&str>, Vec<&str>) = (x.split_whitespace().collect(), y.split_whitespace().collect());
        assert_eq!((&fx[..2], &fx[3..]), (&fy[..2], &fy[3..]));
        let (sx, sy): (f64, f64) = (fx[2].parse().unwrap(), fy[2].parse().unwrap());
        assert!((sx - sy).abs() < tol, "{x} vs {y}");
    }
}

const MANIFEST: &str = r#"
seed = 3
test_utterances = 10

[paths]
corpus = "corpus"
wordpiece = "wp.model"
lexicon = "lexicon.txt"
LM_LINE
graph = "graph.fst"
am = "am.ckpt"
nbest = "nbest.txt"
report = "report.json"

[synth]
words = ["hello", "world", "green", "river", "stone", "apple"]
utterances = 40

[wordpiece]
vocab_size = "30"

[am]
context = 4
stride = 2
hidden = [16]

[am.train]
epochs = 5
"#;

#[test]
fn missing_manifest_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    fs::write(&manifest, MANIFEST.replace("LM_LINE", "")).unwrap();
    let out = wpctc(&["run", "--manifest", p(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("paths.lm"));
    assert!(!dir.path().join("corpus").exists(), "nothing runs before the manifest is complete");
}

#[test]
fn unknown_flag_is_a_config_error() {
    assert_eq!(wpctc(&["decode", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.fst");
    let out = wpctc(&["decode", "--graph", p(&missing), "--posteriors", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_a_report_matching_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    fs::write(&manifest, MANIFEST.replace("LM_LINE", "lm = \"lm.arpa\"")).unwrap();
    let out = ok(&["run", "--manifest", p(&manifest), "--chunk-size", "8", "--right-context", "4"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("WER "));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/report.schema.json")))
            .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> =
        validator.iter_errors(&report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    assert_eq!(report["corpus"]["test_utterances"], 10);
    assert_eq!(report["am"]["stride"], 2);
    assert!(report["decode"]["latency_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn subcommands_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (corpus, lm) = (d.join("corpus"), d.join("lm.arpa"));
    ok(&[
        "synth-data",
        "--words",
        WORDS,
        "--utterances",
        "40",
        "--test-utterances",
        "8",
        "--out",
        p(&corpus),
        "--lm",
        p(&lm),
    ]);
    assert_eq!(fs::read_to_string(corpus.join("test/text")).unwrap().lines().count(), 8);

    let wp = d.join("wp.model");
    ok(&["train-wp", "--vocab-size", "30", "--input", p(&corpus.join("train")), "--output", p(&wp)]);
    let (graph, lexicon) = (d.join("graph.fst"), d.join("lexicon.txt"));
    ok(&["build-graph", "--wp", p(&wp), "--arpa", p(&lm), "--out", p(&graph), "--write-lexicon", p(&lexicon)]);
    assert_eq!(fs::read_to_string(&lexicon).unwrap().lines().count(), 6);

    let am = d.join("am.ckpt");
    let train = corpus.join("train");
    ok(&[
        "train-am",
        "--corpus",
        p(&train),
        "--wp",
        p(&wp),
        "--out",
        p(&am),
        "--stride",
        "2",
        "--epochs",
        "3",
        "--random-phase",
    ]);

    let test = corpus.join("test");
    let (nbest, stats, posts) = (d.join("nbest.txt"), d.join("stats.json"), d.join("posts"));
    let decode_args = ["decode", "--graph", p(&graph), "--am", p(&am), "--features", p(&test), "--nbest", "5"];
    let mut args = decode_args.to_vec();
    args.extend(["--out", p(&nbest), "--stats", p(&stats), "--write-posteriors", p(&posts)]);
    ok(&args);
    let text = fs::read_to_string(&nbest).unwrap();
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert!(
            f[0].starts_with("utt") && f[1].parse::<usize>().unwrap() >= 1 && f[2].parse::<f64>().is_ok(),
            "{line}"
        );
    }
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(s["utterances"], 8);
    assert!(s["frames_skipped"].as_u64().unwrap() <= s["frames_total"].as_u64().unwrap());
    assert_eq!(fs::read_dir(&posts).unwrap().count(), 8);

    // decoding the saved (f32) posteriors gives the same n-best lists
    let again = ok(&["decode", "--graph", p(&graph), "--posteriors", p(&posts), "--nbest", "5"]);
    assert_same_nbest(&String::from_utf8(again.stdout).unwrap(), &text, 1e-4);

    // a streamed AM with enough right context reproduces full-sequence output
    let mut args = decode_args.to_vec();
    args.extend(["--streaming", "--chunk-size", "20", "--right-context", "6"]);
    let streamed = ok(&args);
    assert_same_nbest(&String::from_utf8(streamed.stdout).unwrap(), &text, 1e-6);

    // zero external weight keeps the order; a huge one follows the scores
    let scores = d.join("scores.txt");
    let mut lines = String::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        lines += &format!("{} {} {}\n", f[0], -(i as f64), f[3..].join(" "));
    }
    fs::write(&scores, lines).unwrap();
    let same = ok(&["rescore", "--nbest", p(&nbest), "--scores", p(&scores), "--weight", "0"]);
    let order = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.split_whitespace().skip(3).collect::<Vec<_>>().join(" ")).collect()
    };
    assert_eq!(order(&String::from_utf8(same.stdout).unwrap()), order(&text));
    let flipped = ok(&[
        "rescore",
        "--nbest",
        p(&nbest),
        "--scores",
        p(&scores),
        "--weight",
        "1",
        "--reference",
        p(&test.join("text")),
    ]);
    let flipped = String::from_utf8(flipped.stdout).unwrap();
    let first_utt = text.lines().next().unwrap().split_whitespace().next().unwrap();
    let mine: Vec<&str> = text.lines().filter(|l| l.starts_with(&format!("{first_utt} "))).collect();
    let top = flipped.lines().find(|l| l.starts_with(&format!("{first_utt} "))).unwrap();
    let last_words = mine.last().unwrap().split_whitespace().skip(3).collect::<Vec<_>>().join(" ");
    assert_eq!(top.split_whitespace().skip(3).collect::<Vec<_>>().join(" "), last_words);

    let json = d.join("bench.json");
    let case = format!("wp:wordpiece:2:{}:{}", p(&graph), p(&posts));
    let bench = ok(&["bench-rtf", "--case", &case, "--json", p(&json)]);
    assert!(String::from_utf8_lossy(&bench.stdout).contains("wordpiece"));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["frames_skipped"], 0);
    assert_eq!(rows[0]["audio_seconds"], rows[1]["audio_seconds"]);
}

#[test]
fn chenone_graph_decodes_character_posteriors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (corpus, lm) = (d.join("corpus"), d.join("lm.arpa"));
    ok(&[
        "synth-data",
        "--words",
        WORDS,
        "--utterances",
        "10",
        "--test-utterances",
        "2",
        "--out",
        p(&corpus),
        "--lm",
        p(&lm),
    ]);
    let mut chars: Vec<char> = WORDS.chars().filter(|c| c.is_alphabetic()).collect();
    chars.sort_unstable();
    chars.dedup();
    let names: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
    let units = d.join("units.txt");
    fs::write(&units, names.join("\n")).unwrap();
    let lexicon = d.join("lexicon.txt");
    let lex: String = WORDS
        .split(',')
        .map(|w| format!("{w} {}\n", w.chars().map(String::from).collect::<Vec<_>>().join(" ")))
        .collect();
    fs::write(&lexicon, lex).unwrap();
    let graph = d.join("chenone.fst");
    ok(&[
        "build-graph",
        "--mode",
        "chenone",
        "--units",
        p(&units),
        "--lexicon",
        p(&lexicon),
        "--arpa",
        p(&lm),
        "--out",
        p(&graph),
    ]);

    // posteriors spelling "stone" with blanks between characters
    let n = names.len() + 1;
    let mut r = rng(5);
    let mut scores = Vec::new();
    let mut frame = |peak: usize, r: &mut rand::rngs::StdRng| {
        for u in 0..n {
            let z: f64 = StandardNormal.sample(r);
            scores.push(if u == peak { 8.0 } else { z });
        }
    };
    frame(0, &mut r);
    for c in "stone".chars() {
        let u = 1 + chars.iter().position(|&x| x == c).unwrap();
        for _ in 0..r.random_range(1..3) {
            frame(u, &mut r);
        }
        frame(0, &mut r);
    }
    let post = Posteriorgram::from_scores(scores.len() / n, n, scores).unwrap();
    let file = d.join("stone.pgrm");
    post.write_binary(fs::File::create(&file).unwrap()).unwrap();
    let out = ok(&["decode", "--graph", p(&graph), "--posteriors", p(&file), "--no-blank-skip"]);
    let line = String::from_utf8(out.stdout).unwrap();
    assert_eq!(line.split_whitespace().skip(3).collect::<Vec<_>>(), vec!["stone"], "{line}");
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    fs::write(&manifest, MANIFEST.replace("LM_LINE", "lm = \"lm.arpa\"")).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["run", "--manifest", p(&manifest), "--work-dir", p(&a)]);
    ok(&["run", "--manifest", p(&manifest), "--work-dir", p(&b), "--workers", "3"]);
    for f in ["nbest.txt", "am.ckpt", "graph.fst", "wp.model", "lexicon.txt", "lm.arpa"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
