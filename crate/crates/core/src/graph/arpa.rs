//! ARPA back-off language models and their ε-backoff FST form.

use std::collections::HashMap;
use std::f64::consts::LN_10;

use crate::error::{Error, Result};
use crate::fst::{Arc, Label, Semiring, StateId, SymbolTable, Wfst, EPSILON};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Natural-log probability and back-off weight of one n-gram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramEntry {
    pub log_prob: f64,
    pub backoff: f64,
}

/// Back-off n-gram model. Values are stored as natural logs; the ARPA
/// log10 values are converted once while parsing.
#[derive(Debug, Clone)]
pub struct NGramLm {
    order: usize,
    words: SymbolTable,
    table: HashMap<Vec<Label>, NGramEntry>,
    counts: Vec<usize>,
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Word symbols (`<eps>` first, then unigrams in file order).
    pub fn words(&self) -> &SymbolTable {
        &self.words
    }

    /// Number of n-grams per order, starting at unigrams.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Words that can appear inside a sentence (everything but `<s>`, `</s>`).
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(1).map(|(_, w)| w).filter(|w| *w != BOS && *w != EOS)
    }

    pub fn lookup(&self, ngram: &[&str]) -> Option<NGramEntry> {
        let ids: Option<Vec<Label>> = ngram.iter().map(|w| self.words.find(w)).collect();
        self.table.get(&ids?).copied()
    }

    fn ids(&self, words: &[&str]) -> Result<Vec<Label>> {
        words
            .iter()
            .map(|w| self.words.find(w).ok_or_else(|| Error::validation(format!("word {w:?} is not in the LM"))))
            .collect()
    }

    fn score_ids(&self, history: &[Label], word: Label) -> f64 {
        let keep = history.len().min(self.order - 1);
        let mut h = &history[history.len() - keep..];
        let mut penalty = 0.0;
        loop {
            let mut key = h.to_vec();
            key.push(word);
            if let Some(e) = self.table.get(&key) {
                return penalty + e.log_prob;
            }
            if h.is_empty() {
                return f64::NEG_INFINITY;
            }
            if let Some(e) = self.table.get(h) {
                penalty += e.backoff;
            }
            h = &h[1..];
        }
    }

    /// ln P(word | history), backing off through shorter histories.
    pub fn score(&self, history: &[&str], word: &str) -> Result<f64> {
        let h = self.ids(history)?;
        let w = self.ids(&[word])?[0];
        Ok(self.score_ids(&h, w))
    }

    /// ln P(`<s>` words `</s>`).
    pub fn sentence_score(&self, words: &[&str]) -> Result<f64> {
        let mut history = self.ids(&[BOS])?;
        let mut total = 0.0;
        for w in self.ids(words)?.into_iter().chain(self.ids(&[EOS])?) {
            total += self.score_ids(&history, w);
            history.push(w);
        }
        Ok(total)
    }
}

/// Parses the standard ARPA sections `\data\`, `\N-grams:` and `\end\`.
pub fn parse_arpa(text: &str) -> Result<NGramLm> {
    let mut declared: Vec<usize> = Vec::new();
    let mut words = SymbolTable::new();
    let mut table: HashMap<Vec<Label>, NGramEntry> = HashMap::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut section: Option<usize> = None;
    let mut in_data = false;
    let mut ended = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || ended {
            continue;
        }
        if line == "\\data\\" {
            in_data = true;
            continue;
        }
        if line == "\\end\\" {
            ended = true;
            continue;
        }
        if let Some(n) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
            let n: usize = n.parse().map_err(|_| Error::parse(lineno, format!("bad section header {line:?}")))?;
            if n != counts.len() + 1 {
                return Err(Error::parse(lineno, format!("expected \\{}-grams:", counts.len() + 1)));
            }
            counts.push(0);
            section = Some(n);
            in_data = false;
            continue;
        }
        if in_data {
            let rest = line
                .strip_prefix("ngram ")
                .and_then(|r| r.split_once('='))
                .ok_or_else(|| Error::parse(lineno, format!("expected `ngram N=count`, got {line:?}")))?;
            let n: usize = rest.0.trim().parse().map_err(|_| Error::parse(lineno, "bad n-gram order"))?;
            let c: usize = rest.1.trim().parse().map_err(|_| Error::parse(lineno, "bad n-gram count"))?;
            if n != declared.len() + 1 {
                return Err(Error::parse(lineno, "n-gram orders in \\data\\ must be consecutive from 1"));
            }
            declared.push(c);
            continue;
        }
        let Some(n) = section else {
            return Err(Error::parse(lineno, format!("text outside any section: {line:?}")));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != n + 1 && fields.len() != n + 2 {
            return Err(Error::parse(lineno, format!("a {n}-gram line needs {} or {} fields", n + 1, n + 2)));
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::parse(lineno, format!("bad number {s:?}")))?;
            if v.is_nan() {
                return Err(Error::parse(lineno, "NaN is not a log probability"));
            }
            Ok(v)
        };
        let log_prob = num(fields[0])?;
        if log_prob > 0.0 {
            return Err(Error::parse(lineno, format!("log10 probability {log_prob} is positive")));
        }
        let backoff = if fields.len() == n + 2 { num(fields[n + 1])? } else { 0.0 };
        if backoff == f64::INFINITY {
            return Err(Error::parse(lineno, "back-off weight is +inf"));
        }
        let key: Vec<Label> = if n == 1 {
            vec![words.add(fields[1])]
        } else {
            fields[1..=n]
                .iter()
                .map(|w| words.find(w).ok_or_else(|| Error::parse(lineno, format!("{w:?} has no unigram entry"))))
                .collect::<Result<_>>()?
        };
        if n > 1 && !table.contains_key(&key[..n - 1]) {
            return Err(Error::validation(format!(
                "line {lineno}: context {:?} of this {n}-gram is missing",
                fields[1..n].join(" ")
            )));
        }
        let entry = NGramEntry { log_prob: log_prob * LN_10, backoff: backoff * LN_10 };
        if table.insert(key, entry).is_some() {
            return Err(Error::parse(lineno, "duplicate n-gram"));
        }
        counts[n - 1] += 1;
    }

    if !ended {
        return Err(Error::parse(text.lines().count(), "missing \\end\\"));
    }
    if declared.is_empty() {
        return Err(Error::parse(1, "missing \\data\\ section"));
    }
    if declared != counts {
        return Err(Error::validation(format!("\\data\\ declares {declared:?} n-grams but sections hold {counts:?}")));
    }
    Ok(NGramLm { order: declared.len(), words, table, counts })
}

/// Converts the model to a tropical acceptor over its word symbols. Each
/// history gets a state, explicit n-grams become word arcs, back-off
/// weights become ε arcs to the shortened history and `</s>` becomes a
/// final weight. Weights are negated natural logs.
pub fn lm_to_fst(lm: &NGramLm) -> Wfst {
    let bos = lm.words.find(BOS);
    let eos = lm.words.find(EOS);
    let mut contexts: Vec<&Vec<Label>> =
        lm.table.keys().filter(|k| k.len() < lm.order && Some(*k.last().unwrap()) != eos).collect();
    contexts.sort();

    let mut g = Wfst::new(Semiring::Tropical);
    let mut state_of: HashMap<Vec<Label>, StateId> = HashMap::new();
    state_of.insert(Vec::new(), g.add_state());
    for c in contexts {
        state_of.insert(c.clone(), g.add_state());
    }
    let resolve = |mut h: &[Label]| -> StateId {
        loop {
            if let Some(&s) = state_of.get(h) {
                return s;
            }
            h = &h[1..];
        }
    };

    let mut keys: Vec<&Vec<Label>> = lm.table.keys().collect();
    keys.sort();
    for key in keys {
        let e = lm.table[key];
        let (h, w) = key.split_at(key.len() - 1);
        let w = w[0];
        if Some(w) == bos {
            continue;
        }
        let Some(&src) = state_of.get(h) else { continue };
        if Some(w) == eos {
            g.set_final(src, -e.log_prob);
            continue;
        }
        let mut next = key.clone();
        if next.len() > lm.order - 1 {
            next.remove(0);
        }
        g.add_arc(src, Arc::new(w, w, -e.log_prob, resolve(&next)));
    }
    let mut backoffs: Vec<(&Vec<Label>, StateId)> =
        state_of.iter().filter(|(h, _)| !h.is_empty()).map(|(h, &s)| (h, s)).collect();
    backoffs.sort_by_key(|&(_, s)| s);
    for (h, s) in backoffs {
        let bo = lm.table.get(h).map_or(0.0, |e| e.backoff);
        if bo == f64::NEG_INFINITY {
            continue;
        }
        g.add_arc(s, Arc::new(EPSILON, EPSILON, -bo, resolve(&h[1..])));
    }

    let start = bos.and_then(|b| state_of.get(&vec![b]).copied()).unwrap_or(0);
    g.set_start(start);
    g.set_isymbols(Some(lm.words.clone()));
    g.set_osymbols(Some(lm.words.clone()));
    g.arc_sort();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIGRAM: &str = "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5 a\n-0.7 </s>\n-99 <s>\n\\end\\\n";

    const BIGRAM: &str = "\
\\data\\
ngram 1=4
ngram 2=2

\\1-grams:
-1.0 <s> -0.2
-0.6 a -0.3
-0.4 b -0.1
-0.8 </s>

\\2-grams:
-0.1 <s> a
-0.2 a b

\\end\\
";

    #[test]
    fn unigram_lookup_in_natural_log() {
        let lm = parse_arpa(UNIGRAM).unwrap();
        assert_eq!(lm.order(), 1);
        let e = lm.lookup(&["a"]).unwrap();
        assert!((e.log_prob - (-0.5 * LN_10)).abs() < 1e-12);
        assert_eq!(lm.vocabulary().collect::<Vec<_>>(), vec!["a"]);
    }

    #[test]
    fn unigram_fst_is_one_state() {
        let g = lm_to_fst(&parse_arpa(UNIGRAM).unwrap());
        assert_eq!(g.num_states(), 1);
        assert_eq!(g.num_arcs(), 1);
        assert!((g.final_weight(0) - 0.7 * LN_10).abs() < 1e-12);
    }

    #[test]
    fn backoff_identity() {
        let lm = parse_arpa(BIGRAM).unwrap();
        let got = lm.score(&["b"], "a").unwrap();
        assert!((got - (-0.1 - 0.6) * LN_10).abs() < 1e-12);
        let explicit = lm.score(&["a"], "b").unwrap();
        assert!((explicit - (-0.2 * LN_10)).abs() < 1e-12);
        let s = lm.sentence_score(&[]).unwrap();
        assert!((s - (-0.2 - 0.8) * LN_10).abs() < 1e-12);
    }

    #[test]
    fn malformed_lines_report_position() {
        let bad = BIGRAM.replace("-0.2 a b", "-0.2 a b c d");
        match parse_arpa(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("{other:?}"),
        }
        let count = BIGRAM.replace("ngram 2=2", "ngram 2=3");
        assert!(matches!(parse_arpa(&count), Err(Error::Validation(_))));
        assert!(parse_arpa(&BIGRAM.replace("\\end\\", "")).is_err());
        assert!(matches!(parse_arpa(&BIGRAM.replace("-0.4 b -0.1", "-0.4 b inf")), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_context_is_rejected() {
        let text = "\\data\\\nngram 1=2\nngram 2=0\nngram 3=1\n\\1-grams:\n-1 a\n-1 b\n\\2-grams:\n\\3-grams:\n-1 a b a\n\\end\\\n";
        assert!(matches!(parse_arpa(text), Err(Error::Validation(_))));
    }
}
