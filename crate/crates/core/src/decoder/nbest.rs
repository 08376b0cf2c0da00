use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ctc::Unit;
use crate::error::{Error, Result};
use crate::fst::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Vec<String>,
    pub word_ids: Vec<Label>,
    /// Scaled negative log posteriors summed over processed frames.
    pub acoustic_score: f64,
    /// Graph (lexicon and LM) cost along the path.
    pub graph_score: f64,
    /// Ranking score; `acoustic_score + graph_score` until rescored.
    pub score: f64,
    /// Unit read at each processed frame, when tracing was enabled.
    pub alignment: Option<Vec<Unit>>,
}

impl Hypothesis {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// Hypotheses with distinct word sequences, best (lowest score) first.
/// Empty when no token survived to a final state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    pub hypotheses: Vec<Hypothesis>,
}

impl NBestList {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    /// `utt_id rank score word1 word2 ...` lines, rank from 1.
    pub fn write_text<W: Write>(&self, mut w: W, utt_id: &str) -> Result<()> {
        for (rank, h) in self.hypotheses.iter().enumerate() {
            write!(w, "{utt_id} {} {:.6}", rank + 1, h.score)?;
            for word in &h.words {
                write!(w, " {word}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Parses `utt_id rank score word1 word2 ...` lines, grouped by
/// utterance in first-appearance order. Only the total score survives the
/// text form, so it is also stored as the acoustic score.
pub fn read_nbest_text<R: BufRead>(r: R) -> Result<Vec<(String, NBestList)>> {
    let mut out: Vec<(String, NBestList)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(utt) = fields.next() else { continue };
        let rank: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(i + 1, "expected a rank after the utterance id"))?;
        let score: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(i + 1, "expected a score after the rank"))?;
        if out.last().is_none_or(|(u, _)| u != utt) {
            if out.iter().any(|(u, _)| u == utt) {
                return Err(Error::parse(i + 1, format!("hypotheses of {utt} are not contiguous")));
            }
            out.push((utt.to_string(), NBestList::default()));
        }
        let list = &mut out.last_mut().unwrap().1;
        if rank != list.len() + 1 {
            return Err(Error::parse(i + 1, format!("expected rank {}, got {rank}", list.len() + 1)));
        }
        list.hypotheses.push(Hypothesis {
            words: fields.map(String::from).collect(),
            word_ids: Vec::new(),
            acoustic_score: score,
            graph_score: 0.0,
            score,
            alignment: None,
        });
    }
    Ok(out)
}

/// Re-ranks by `(1 − λ)·score + λ·external`, where `external` is keyed by
/// the space-joined word sequence. The sort is stable.
pub fn rescore_nbest(nbest: &NBestList, external: &HashMap<String, f64>, weight: f64) -> Result<NBestList> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::config(format!("rescoring weight must be in [0, 1], got {weight}")));
    }
    let mut hypotheses = nbest
        .hypotheses
        .iter()
        .map(|h| {
            let text = h.text();
            let ext = external
                .get(&text)
                .ok_or_else(|| Error::validation(format!("no external score for hypothesis {text:?}")))?;
            Ok(Hypothesis { score: (1.0 - weight) * h.score + weight * ext, ..h.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    hypotheses.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(NBestList { hypotheses })
}

/// Substitutions + deletions + insertions turning `reference` into
/// `hypothesis`.
pub fn word_errors<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r.as_ref() != h.as_ref());
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Word error rate. An empty reference counts every hypothesis word as an
/// insertion over a denominator of 1.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> f64 {
    word_errors(reference, hypothesis) as f64 / reference.len().max(1) as f64
}

/// Lowest WER of any hypothesis in the list.
pub fn oracle_wer<S: AsRef<str>>(nbest: &NBestList, reference: &[S]) -> Result<f64> {
    nbest
        .hypotheses
        .iter()
        .map(|h| wer(reference, &h.words))
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::validation("oracle WER of an empty n-best list"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nbest_text_roundtrip() {
        let a = NBestList { hypotheses: vec![hyp("a b", 1.5), hyp("a", 2.25), hyp("", 3.0)] };
        let b = NBestList { hypotheses: vec![hyp("c", 0.5)] };
        let mut buf = Vec::new();
        a.write_text(&mut buf, "u1").unwrap();
        b.write_text(&mut buf, "u2").unwrap();
        let back = read_nbest_text(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("u1".to_string(), a), ("u2".to_string(), b)]);
        assert!(read_nbest_text("u1 2 0.5 a\n".as_bytes()).is_err());
        assert!(read_nbest_text("u1 1 0.5 a\nu2 1 1 b\nu1 2 1 c\n".as_bytes()).is_err());
    }

    fn hyp(words: &str, score: f64) -> Hypothesis {
        Hypothesis {
            words: words.split_whitespace().map(String::from).collect(),
            word_ids: Vec::new(),
            acoustic_score: score,
            graph_score: 0.0,
            score,
            alignment: None,
        }
    }

    fn list() -> NBestList {
        NBestList { hypotheses: vec![hyp("a b", 1.0), hyp("a c", 2.0), hyp("b", 3.0)] }
    }

    #[test]
    fn wer_cases() {
        assert_eq!(wer(&["a", "b", "c"], &["a", "c"]), 1.0 / 3.0);
        assert_eq!(wer::<&str, &str>(&[], &[]), 0.0);
        assert_eq!(wer::<&str, &str>(&[], &["x", "y"]), 2.0);
        assert_eq!(word_errors(&["a", "b"], &["b", "a"]), 2);
        assert_eq!(oracle_wer(&list(), &["a", "c"]).unwrap(), 0.0);
        assert!(oracle_wer(&NBestList::default(), &["a"]).is_err());
    }

    #[test]
    fn rescoring_extremes() {
        let ext: HashMap<String, f64> =
            [("a b", 9.0), ("a c", 5.0), ("b", 1.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let same = rescore_nbest(&list(), &ext, 0.0).unwrap();
        assert_eq!(same.hypotheses.iter().map(Hypothesis::text).collect::<Vec<_>>(), vec!["a b", "a c", "b"]);
        let flipped = rescore_nbest(&list(), &ext, 1.0).unwrap();
        assert_eq!(flipped.hypotheses.iter().map(Hypothesis::text).collect::<Vec<_>>(), vec!["b", "a c", "a b"]);
        let mut partial = ext.clone();
        partial.remove("a c");
        let err = rescore_nbest(&list(), &partial, 0.5).unwrap_err();
        assert!(err.to_string().contains("a c"));
    }

    #[test]
    fn text_output() {
        let mut out = Vec::new();
        list().write_text(&mut out, "utt1").unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().next().unwrap(), "utt1 1 1.000000 a b");
    }
}
