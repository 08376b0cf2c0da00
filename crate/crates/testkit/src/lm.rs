use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::Rng;

/// A back-off LM held as plain maps of log10 values, with its own
/// scorer and ARPA writer.
#[derive(Debug, Clone)]
pub struct ReferenceLm {
    pub order: usize,
    pub words: Vec<String>,
    /// n-gram → (log10 prob, log10 back-off)
    pub ngrams: BTreeMap<Vec<String>, (f64, f64)>,
}

impl ReferenceLm {
    /// log10 P(word | history) by the textbook back-off recursion.
    pub fn log10(&self, history: &[String], word: &str) -> f64 {
        let start = history.len().saturating_sub(self.order - 1);
        let h = &history[start..];
        let mut key: Vec<String> = h.to_vec();
        key.push(word.to_string());
        if let Some(&(p, _)) = self.ngrams.get(&key) {
            return p;
        }
        assert!(!h.is_empty(), "{word} has no unigram");
        let bo = self.ngrams.get(h).map_or(0.0, |&(_, b)| b);
        bo + self.log10(&h[1..], word)
    }

    /// Natural-log score of a whole sentence including `</s>`.
    pub fn sentence_ln(&self, sentence: &[&str]) -> f64 {
        let mut history = vec!["<s>".to_string()];
        let mut total = 0.0;
        for w in sentence.iter().copied().chain(["</s>"]) {
            total += self.log10(&history, w);
            history.push(w.to_string());
        }
        total * std::f64::consts::LN_10
    }

    pub fn to_arpa(&self) -> String {
        let mut by_order: Vec<Vec<(&Vec<String>, &(f64, f64))>> = vec![Vec::new(); self.order];
        for (k, v) in &self.ngrams {
            by_order[k.len() - 1].push((k, v));
        }
        let mut s = String::from("\\data\\\n");
        for (n, list) in by_order.iter().enumerate() {
            writeln!(s, "ngram {}={}", n + 1, list.len()).unwrap();
        }
        for (n, list) in by_order.iter().enumerate() {
            writeln!(s, "\n\\{}-grams:", n + 1).unwrap();
            for (k, (p, b)) in list {
                if *b != 0.0 {
                    writeln!(s, "{p}\t{}\t{b}", k.join(" ")).unwrap();
                } else {
                    writeln!(s, "{p}\t{}", k.join(" ")).unwrap();
                }
            }
        }
        s.push_str("\n\\end\\\n");
        s
    }
}

/// Random back-off LM whose explicit n-grams always beat the back-off
/// estimate by more than any chain of back-off penalties. Under that
/// condition the ε-backoff acceptor's best path for a sentence is the
/// back-off recursion's path, so tropical scores must agree exactly.
pub fn random_lm<R: Rng>(rng: &mut R, n_words: usize, order: usize, density: f64) -> ReferenceLm {
    let words: Vec<String> = (0..n_words).map(|i| format!("w{i}")).collect();
    let mut lm = ReferenceLm { order, words: words.clone(), ngrams: BTreeMap::new() };
    let max_bo = 0.4;
    let boost = max_bo * order as f64 + 0.1;
    let bo = |r: &mut R| -> f64 { -(r.random_range(0.0..max_bo) * 100.0).round() / 100.0 };

    let mut predicted: Vec<String> = words.clone();
    predicted.push("</s>".into());
    lm.ngrams.insert(vec!["<s>".into()], (-99.0, bo(rng)));
    for w in &predicted {
        let p = -(rng.random_range(3.0f64..3.5) * 100.0).round() / 100.0 - boost * (order - 1) as f64;
        let b = if w == "</s>" { 0.0 } else { bo(rng) };
        lm.ngrams.insert(vec![w.clone()], (p, b));
    }
    for n in 2..=order {
        let contexts: Vec<Vec<String>> =
            lm.ngrams.keys().filter(|k| k.len() == n - 1 && k.last().unwrap() != "</s>").cloned().collect();
        for h in contexts {
            for w in &predicted {
                if !rng.random_bool(density) {
                    continue;
                }
                let lower = lm.log10(&h[1..], w);
                let p = lower + boost + (rng.random_range(0.0f64..0.2) * 100.0).round() / 100.0;
                let b = if n < order && w != "</s>" { bo(rng) } else { 0.0 };
                let mut key = h.clone();
                key.push(w.clone());
                lm.ngrams.insert(key, (p.min(0.0), b));
            }
        }
    }
    lm
}

pub fn random_sentence<R: Rng>(rng: &mut R, lm: &ReferenceLm, max_len: usize) -> Vec<String> {
    (0..rng.random_range(0..=max_len)).map(|_| lm.words.choose(rng).unwrap().clone()).collect()
}
