use rand::seq::IndexedRandom;
use rand::Rng;
use wpctc_core::wordpiece::{detokenize, train_wordpiece, TrainConfig, UnigramTrainer, WordCounts, WordpieceModel};
use wpctc_testkit::rng;
use wpctc_testkit::wordpiece::best_split;

fn random_corpus<R: Rng>(r: &mut R, words: usize, alphabet: &[char]) -> WordCounts {
    // Words built from a few recurring syllables so multi-char pieces matter.
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

#[test]
fn em_never_lowers_likelihood() {
    let mut r = rng(41);
    for _ in 0..5 {
        let corpus = random_corpus(&mut r, 30, &['a', 'b', 'c', 'd', 'e']);
        let mut t = UnigramTrainer::new(&corpus, 25, &TrainConfig::default()).unwrap();
        while t.vocab_size() > 25 {
            let mut prev = f64::NEG_INFINITY;
            for _ in 0..4 {
                let ll = t.em_step();
                assert!(ll >= prev - 1e-9, "EM went from {prev} to {ll}");
                prev = ll;
            }
            let after = t.log_likelihood();
            assert!(after >= prev - 1e-9);
            t.prune(25, 0.2);
        }
    }
}

#[test]
fn viterbi_matches_exhaustive_splits() {
    let mut r = rng(42);
    let corpus = random_corpus(&mut r, 60, &['a', 'b', 'c', 'd']);
    let (model, _) = train_wordpiece(&corpus, 30, &TrainConfig::default()).unwrap();
    let chars_where = |start: bool| -> Vec<char> {
        model
            .pieces()
            .iter()
            .filter(|p| p.word_start == start && p.text.chars().count() == 1)
            .map(|p| p.text.chars().next().unwrap())
            .collect()
    };
    let (initial, inner) = (chars_where(true), chars_where(false));
    for _ in 0..300 {
        let len = r.random_range(1..=10);
        let word: String = std::iter::once(*initial.choose(&mut r).unwrap())
            .chain((1..len).map(|_| *inner.choose(&mut r).unwrap()))
            .collect();
        let oracle = best_split(&model, &word).unwrap();
        let got = model.viterbi_score(&word).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{word}: {got} vs {oracle}");
        let seg = model.segment_viterbi(&word).unwrap();
        let pieces_score: f64 = seg.pieces.iter().map(|&u| model.piece(u).unwrap().log_prob).sum();
        assert!((pieces_score - oracle).abs() < 1e-9);
    }
}

#[test]
fn corpus_words_roundtrip() {
    let mut r = rng(43);
    let corpus = random_corpus(&mut r, 200, &['k', 'a', 't', 'o', 'r', 'i']);
    let (model, _) = train_wordpiece(&corpus, 40, &TrainConfig::default()).unwrap();
    let words: Vec<&String> = corpus.keys().collect();
    for _ in 0..1000 {
        let w = *words.choose(&mut r).unwrap();
        let seg = model.segment_viterbi(w).unwrap();
        assert_eq!(&detokenize(&model.render(&seg.pieces)), w);
    }
}

#[test]
fn hello_with_known_pieces() {
    let model =
        WordpieceModel::from_names(&[("_he", -1.0), ("ll", -1.0), ("o", -1.0), ("_h", -3.0), ("e", -3.0), ("l", -3.0)])
            .unwrap();
    let seg = model.segment_viterbi("hello").unwrap();
    assert_eq!(model.render(&seg.pieces), vec!["_he", "ll", "o"]);
}

fn viterbi_ll(model: &WordpieceModel, corpus: &WordCounts) -> f64 {
    corpus.iter().map(|(w, &c)| c as f64 * model.viterbi_score(w).unwrap()).sum()
}

#[test]
fn larger_vocab_fits_better() {
    let mut r = rng(44);
    let corpus = random_corpus(&mut r, 80, &['m', 'n', 'o', 'p', 'q']);
    let mut prev = f64::NEG_INFINITY;
    for size in [15, 25, 40, 60] {
        let (model, _) = train_wordpiece(&corpus, size, &TrainConfig::default()).unwrap();
        let ll = viterbi_ll(&model, &corpus);
        assert!(ll >= prev - 1e-9, "vocab {size}: {ll} < {prev}");
        prev = ll;
    }
}
