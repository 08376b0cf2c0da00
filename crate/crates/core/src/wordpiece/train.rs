//! Unigram-LM vocabulary training: frequency-ranked substring seeds, EM
//! over each word's segmentation lattice, and likelihood-loss pruning that
//! never removes single characters.

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fst::log_add;

use super::model::{Piece, WordpieceModel, WORD_START};

/// Word → occurrence count.
pub type WordCounts = BTreeMap<String, u64>;

/// Vocabulary sizes offered as named presets (`1k`, `2k`, ...).
pub const VOCAB_PRESETS: [usize; 5] = [1000, 2000, 5000, 10000, 16000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed_multiplier: usize,
    pub prune_fraction: f64,
    pub em_iterations: usize,
    pub max_piece_chars: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { seed_multiplier: 10, prune_fraction: 0.2, em_iterations: 2, max_piece_chars: 8 }
    }
}

/// Parses a vocabulary size such as `2000`, `2k` or `16K`.
pub fn parse_vocab_size(s: &str) -> Result<usize> {
    let t = s.trim().to_ascii_lowercase();
    let parsed = match t.strip_suffix('k') {
        Some(n) => n.parse::<usize>().map(|n| n * 1000),
        None => t.parse::<usize>(),
    };
    parsed.map_err(|_| Error::config(format!("bad vocabulary size {s:?}")))
}

/// Counts whitespace-separated words in raw text, or reads `word<TAB>count`
/// lines when every non-empty line has that shape.
pub fn read_corpus(text: &str) -> Result<WordCounts> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let tabular = !lines.is_empty()
        && lines.iter().all(|l| {
            l.split_once('\t')
                .is_some_and(|(w, c)| !w.trim().is_empty() && !w.contains(' ') && c.trim().parse::<u64>().is_ok())
        });
    let mut counts = WordCounts::new();
    if tabular {
        for l in lines {
            let (w, c) = l.split_once('\t').unwrap();
            *counts.entry(w.trim().to_string()).or_default() += c.trim().parse::<u64>().unwrap();
        }
    } else {
        for w in text.split_whitespace() {
            *counts.entry(w.to_string()).or_default() += 1;
        }
    }
    if let Some(bad) = counts.keys().find(|w| w.contains(WORD_START)) {
        return Err(Error::validation(format!("word {bad:?} contains the reserved marker {WORD_START:?}")));
    }
    Ok(counts)
}

/// Single-character pieces every word needs: `_c` for word-initial
/// characters and `c` for the rest.
pub fn required_pieces(corpus: &WordCounts) -> Vec<(bool, String)> {
    let mut set: HashSet<(bool, String)> = HashSet::new();
    for w in corpus.keys() {
        for (i, c) in w.chars().enumerate() {
            set.insert((i == 0, c.to_string()));
        }
    }
    let mut v: Vec<_> = set.into_iter().collect();
    v.sort();
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Corpus log-likelihood measured at every E-step, grouped by pruning
    /// round (the last group is the final re-estimation).
    pub log_likelihoods: Vec<Vec<f64>>,
    pub requested_vocab: usize,
    pub final_vocab: usize,
}

struct Word {
    chars: Vec<char>,
    count: f64,
}

/// Stepwise trainer; [`train_wordpiece`] drives it to completion.
pub struct UnigramTrainer {
    words: Vec<Word>,
    pieces: Vec<Piece>,
    index: HashMap<(bool, String), usize>,
    required: HashSet<(bool, String)>,
    max_chars: usize,
}

impl UnigramTrainer {
    pub fn new(corpus: &WordCounts, vocab_size: usize, cfg: &TrainConfig) -> Result<Self> {
        if corpus.is_empty() || corpus.values().all(|&c| c == 0) {
            return Err(Error::config("empty training corpus"));
        }
        let required: HashSet<(bool, String)> = required_pieces(corpus).into_iter().collect();
        if vocab_size < required.len() {
            return Err(Error::config(format!(
                "vocabulary size {vocab_size} is below the {} single-character pieces the corpus needs",
                required.len()
            )));
        }
        let max_chars = cfg.max_piece_chars.max(1);
        let mut freq: HashMap<(bool, String), f64> = HashMap::new();
        let mut words = Vec::new();
        for (w, &c) in corpus {
            if c == 0 {
                continue;
            }
            let chars: Vec<char> = w.chars().collect();
            for i in 0..chars.len() {
                for j in i + 1..=(i + max_chars).min(chars.len()) {
                    let key = (i == 0, chars[i..j].iter().collect::<String>());
                    *freq.entry(key).or_default() += c as f64;
                }
            }
            words.push(Word { chars, count: c as f64 });
        }

        let cap = (cfg.seed_multiplier.max(1) * vocab_size).max(required.len());
        let mut candidates: Vec<((bool, String), f64)> =
            freq.iter().filter(|(k, _)| !required.contains(*k)).map(|(k, &f)| (k.clone(), f)).collect();
        candidates.sort_by(|(ka, fa), (kb, fb)| {
            let sa = fa * ka.1.chars().count() as f64;
            let sb = fb * kb.1.chars().count() as f64;
            sb.total_cmp(&sa).then_with(|| ka.cmp(kb))
        });
        candidates.truncate(cap - required.len());

        let mut seeds: Vec<((bool, String), f64)> = required.iter().map(|k| (k.clone(), freq[k])).collect();
        seeds.sort_by(|a, b| a.0.cmp(&b.0));
        seeds.extend(candidates);
        let total: f64 = seeds.iter().map(|(_, f)| f).sum();
        let pieces: Vec<Piece> = seeds
            .into_iter()
            .map(|((word_start, text), f)| Piece { text, word_start, log_prob: (f / total).ln() })
            .collect();

        let mut t = UnigramTrainer { words, pieces, index: HashMap::new(), required, max_chars };
        t.reindex();
        Ok(t)
    }

    fn reindex(&mut self) {
        self.index = self.pieces.iter().enumerate().map(|(i, p)| ((p.word_start, p.text.clone()), i)).collect();
        self.max_chars = self.pieces.iter().map(|p| p.text.chars().count()).max().unwrap_or(1);
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    /// Pieces spanning `chars[begin..end]` for each end position.
    fn arcs_ending_at(&self, chars: &[char], end: usize, buf: &mut String, out: &mut Vec<(usize, usize)>) {
        out.clear();
        for begin in end.saturating_sub(self.max_chars)..end {
            buf.clear();
            buf.extend(&chars[begin..end]);
            if let Some(&pi) = self.index.get(&(begin == 0, buf.clone())) {
                if self.pieces[pi].log_prob > f64::NEG_INFINITY {
                    out.push((begin, pi));
                }
            }
        }
    }

    /// Corpus log-likelihood Σ count · log Σ_segmentations Π p(piece).
    pub fn log_likelihood(&self) -> f64 {
        let mut buf = String::new();
        let mut arcs = Vec::new();
        self.words
            .iter()
            .map(|w| {
                let n = w.chars.len();
                let mut fwd = vec![f64::NEG_INFINITY; n + 1];
                fwd[0] = 0.0;
                for end in 1..=n {
                    self.arcs_ending_at(&w.chars, end, &mut buf, &mut arcs);
                    for &(b, pi) in &arcs {
                        fwd[end] = log_add(fwd[end], fwd[b] + self.pieces[pi].log_prob);
                    }
                }
                w.count * fwd[n]
            })
            .sum()
    }

    /// One EM iteration. Returns the corpus log-likelihood under the
    /// parameters before the update.
    pub fn em_step(&mut self) -> f64 {
        let mut expected = vec![0.0f64; self.pieces.len()];
        let mut ll = 0.0;
        let mut buf = String::new();
        let mut arcs = Vec::new();
        for w in &self.words {
            let n = w.chars.len();
            let mut lattice: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n + 1);
            lattice.push(Vec::new());
            let mut fwd = vec![f64::NEG_INFINITY; n + 1];
            fwd[0] = 0.0;
            for end in 1..=n {
                self.arcs_ending_at(&w.chars, end, &mut buf, &mut arcs);
                for &(b, pi) in &arcs {
                    fwd[end] = log_add(fwd[end], fwd[b] + self.pieces[pi].log_prob);
                }
                lattice.push(arcs.clone());
            }
            let z = fwd[n];
            ll += w.count * z;
            let mut bwd = vec![f64::NEG_INFINITY; n + 1];
            bwd[n] = 0.0;
            for end in (1..=n).rev() {
                if bwd[end] == f64::NEG_INFINITY {
                    continue;
                }
                for &(b, pi) in &lattice[end] {
                    let lp = self.pieces[pi].log_prob;
                    bwd[b] = log_add(bwd[b], lp + bwd[end]);
                    let post = (fwd[b] + lp + bwd[end] - z).exp();
                    expected[pi] += w.count * post;
                }
            }
        }
        let total: f64 = expected.iter().sum();
        for (p, &c) in self.pieces.iter_mut().zip(&expected) {
            p.log_prob = if c > 0.0 { (c / total).ln() } else { f64::NEG_INFINITY };
        }
        ll
    }

    /// Removes up to `fraction` of the pieces (never below `target`, never
    /// single characters), lowest likelihood loss first. Returns how many
    /// were removed.
    pub fn prune(&mut self, target: usize, fraction: f64) -> usize {
        if self.pieces.len() <= target {
            return 0;
        }
        let excess = self.pieces.len() - target;
        let step = ((self.pieces.len() as f64 * fraction).floor() as usize).max(1).min(excess);

        let model = self.snapshot();
        let mut viterbi_freq = vec![0.0f64; self.pieces.len()];
        for w in &self.words {
            let word: String = w.chars.iter().collect();
            if let Ok(seg) = model.segment_viterbi(&word) {
                for u in seg.pieces {
                    viterbi_freq[u as usize - 1] += w.count;
                }
            }
        }
        let mut losses: Vec<(f64, usize)> = self
            .pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| !self.required.contains(&(p.word_start, p.text.clone())))
            .map(|(i, p)| {
                let loss = if viterbi_freq[i] == 0.0 {
                    0.0
                } else {
                    viterbi_freq[i] * (p.log_prob - model.best_alternative(i))
                };
                (loss, i)
            })
            .collect();
        losses.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| self.pieces[a.1].name().cmp(&self.pieces[b.1].name())));
        let doomed: HashSet<usize> = losses.iter().take(step).map(|&(_, i)| i).collect();
        let removed = doomed.len();
        let mut i = 0;
        self.pieces.retain(|_| {
            let keep = !doomed.contains(&i);
            i += 1;
            keep
        });
        self.renormalize();
        self.reindex();
        removed
    }

    fn renormalize(&mut self) {
        let finite: Vec<f64> = self.pieces.iter().map(|p| p.log_prob).filter(|v| v.is_finite()).collect();
        let z = crate::fst::log_sum_exp(&finite);
        if z.is_finite() {
            for p in &mut self.pieces {
                p.log_prob -= z;
            }
        }
    }

    fn snapshot(&self) -> WordpieceModel {
        WordpieceModel::new(self.pieces.clone()).expect("trainer pieces are unique and non-empty")
    }

    /// Final model: pieces whose probability collapsed to zero get a floor
    /// below the smallest live probability, the distribution is
    /// renormalized, and pieces are ordered by descending probability.
    pub fn finish(mut self) -> WordpieceModel {
        let min_live = self.pieces.iter().map(|p| p.log_prob).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        let floor = if min_live.is_finite() { min_live - 10f64.ln() } else { -(self.pieces.len() as f64).ln() };
        for p in &mut self.pieces {
            if !p.log_prob.is_finite() {
                p.log_prob = floor;
            }
        }
        self.renormalize();
        self.pieces.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.name().cmp(&b.name())));
        self.snapshot()
    }
}

/// Trains a unigram wordpiece model of (at most) `vocab_size` pieces.
pub fn train_wordpiece(
    corpus: &WordCounts,
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<(WordpieceModel, TrainReport)> {
    if !(0.0..1.0).contains(&cfg.prune_fraction) || cfg.prune_fraction == 0.0 {
        return Err(Error::config(format!("prune_fraction must be in (0, 1), got {}", cfg.prune_fraction)));
    }
    let mut trainer = UnigramTrainer::new(corpus, vocab_size, cfg)?;
    if trainer.vocab_size() < vocab_size {
        warn!("corpus only supports {} pieces; requested vocabulary size was {vocab_size}", trainer.vocab_size());
    }
    let iters = cfg.em_iterations.max(1);
    let mut log_likelihoods = Vec::new();
    while trainer.vocab_size() > vocab_size {
        log_likelihoods.push((0..iters).map(|_| trainer.em_step()).collect());
        trainer.prune(vocab_size, cfg.prune_fraction);
    }
    log_likelihoods.push((0..iters).map(|_| trainer.em_step()).collect());
    let model = trainer.finish();
    let report = TrainReport { log_likelihoods, requested_vocab: vocab_size, final_vocab: model.num_pieces() };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(entries: &[(&str, u64)]) -> WordCounts {
        entries.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn whole_frequent_words_win() {
        let (m, _) = train_wordpiece(&corpus(&[("hello", 10), ("world", 10)]), 100, &TrainConfig::default()).unwrap();
        let mut multi: Vec<&Piece> = m.pieces().iter().filter(|p| p.text.chars().count() > 1).collect();
        multi.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        let top: HashSet<String> = multi.iter().take(2).map(|p| p.name()).collect();
        assert_eq!(top, ["_hello".to_string(), "_world".to_string()].into_iter().collect());
    }

    #[test]
    fn alphabet_sized_vocab_keeps_only_characters() {
        let c = corpus(&[("aaa", 1)]);
        let alphabet = required_pieces(&c).len();
        assert_eq!(alphabet, 2);
        let (m, report) = train_wordpiece(&c, alphabet, &TrainConfig::default()).unwrap();
        let mut names: Vec<String> = m.pieces().iter().map(Piece::name).collect();
        names.sort();
        assert_eq!(names, vec!["_a", "a"]);
        assert_eq!(report.final_vocab, 2);
    }

    #[test]
    fn vocab_below_alphabet_is_rejected() {
        let c = corpus(&[("abc", 1)]);
        assert!(matches!(train_wordpiece(&c, 2, &TrainConfig::default()), Err(Error::Config(_))));
        assert!(matches!(train_wordpiece(&WordCounts::new(), 10, &TrainConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn hits_requested_size() {
        let c = corpus(&[("abracadabra", 5), ("cadabra", 3), ("abra", 7), ("bra", 2), ("dab", 4)]);
        let (m, report) = train_wordpiece(&c, 20, &TrainConfig::default()).unwrap();
        assert_eq!(m.num_pieces(), 20);
        assert!(report.log_likelihoods.len() > 1);
        let total: f64 = m.pieces().iter().map(|p| p.log_prob.exp()).sum();
        assert!(total <= 1.0 + 1e-6);
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn presets_parse() {
        let parsed: Vec<usize> =
            ["1k", "2K", "5k", "10k", "16k"].iter().map(|s| parse_vocab_size(s).unwrap()).collect();
        assert_eq!(parsed, VOCAB_PRESETS.to_vec());
        assert_eq!(parse_vocab_size("300").unwrap(), 300);
        assert!(parse_vocab_size("lots").is_err());
    }

    #[test]
    fn corpus_formats() {
        let counted = read_corpus("hello\t3\nworld\t1\n").unwrap();
        assert_eq!(counted["hello"], 3);
        let raw = read_corpus("hello world\nhello\n").unwrap();
        assert_eq!(raw["hello"], 2);
        assert_eq!(raw["world"], 1);
        assert!(read_corpus("snake_case word").is_err());
    }
}
