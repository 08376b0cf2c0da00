use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::Rng;

use crate::ctc::Unit;
use crate::error::{Error, Result};

/// Prefix marking a piece that starts a word.
pub const WORD_START: char = '_';

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    /// Piece characters without the word-start marker.
    pub text: String,
    pub word_start: bool,
    pub log_prob: f64,
}

impl Piece {
    /// Display form, e.g. `_he` or `ll`.
    pub fn name(&self) -> String {
        if self.word_start {
            format!("{WORD_START}{}", self.text)
        } else {
            self.text.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentMode {
    Viterbi,
    /// Draw from the `nbest` best segmentations with probability
    /// proportional to `exp(alpha * log p)`.
    Sample {
        nbest: usize,
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub word: String,
    pub pieces: Vec<Unit>,
}

/// Unigram wordpiece vocabulary. Piece `i` in [`WordpieceModel::pieces`]
/// is acoustic unit `i + 1`; unit 0 is the CTC blank.
#[derive(Debug, Clone, PartialEq)]
pub struct WordpieceModel {
    pieces: Vec<Piece>,
    index: HashMap<(bool, String), usize>,
    alphabet: HashSet<char>,
    max_chars: usize,
}

impl WordpieceModel {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut max_chars = 0;
        for (i, p) in pieces.iter().enumerate() {
            if p.text.is_empty() {
                return Err(Error::validation(format!("piece {} is empty", i + 1)));
            }
            if p.text.contains(WORD_START) {
                return Err(Error::validation(format!("piece {:?} contains the marker inside", p.name())));
            }
            if index.insert((p.word_start, p.text.clone()), i).is_some() {
                return Err(Error::validation(format!("duplicate piece {:?}", p.name())));
            }
            max_chars = max_chars.max(p.text.chars().count());
        }
        let alphabet = pieces.iter().flat_map(|p| p.text.chars()).collect();
        Ok(WordpieceModel { pieces, index, alphabet, max_chars })
    }

    /// Builds a model from display names such as `_he`.
    pub fn from_names<S: AsRef<str>>(entries: &[(S, f64)]) -> Result<Self> {
        let pieces = entries
            .iter()
            .map(|(name, lp)| {
                let name = name.as_ref();
                let (word_start, text) = match name.strip_prefix(WORD_START) {
                    Some(rest) => (true, rest.to_string()),
                    None => (false, name.to_string()),
                };
                Piece { text, word_start, log_prob: *lp }
            })
            .collect();
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Number of acoustic units including blank.
    pub fn num_units(&self) -> usize {
        self.pieces.len() + 1
    }

    pub fn piece(&self, unit: Unit) -> Option<&Piece> {
        unit.checked_sub(1).and_then(|i| self.pieces.get(i as usize))
    }

    pub fn piece_name(&self, unit: Unit) -> Option<String> {
        self.piece(unit).map(Piece::name)
    }

    pub fn unit_of(&self, name: &str) -> Option<Unit> {
        let (ws, text) = match name.strip_prefix(WORD_START) {
            Some(rest) => (true, rest),
            None => (false, name),
        };
        self.lookup(ws, text).map(|i| i as Unit + 1)
    }

    fn lookup(&self, word_start: bool, text: &str) -> Option<usize> {
        self.index.get(&(word_start, text.to_string())).copied()
    }

    pub fn segment<R: Rng>(&self, word: &str, mode: SegmentMode, rng: &mut R) -> Result<Segmentation> {
        match mode {
            SegmentMode::Viterbi => self.segment_viterbi(word),
            SegmentMode::Sample { nbest, alpha } => {
                let candidates = self.nbest_segmentations(word, nbest.max(1))?;
                let top = candidates[0].1;
                let weights: Vec<f64> = candidates.iter().map(|(_, s)| (alpha * (s - top)).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut draw = rng.random::<f64>() * total;
                for ((pieces, _), w) in candidates.iter().zip(&weights) {
                    if draw < *w {
                        return Ok(Segmentation { word: word.to_string(), pieces: pieces.clone() });
                    }
                    draw -= w;
                }
                let (pieces, _) = candidates.into_iter().last().unwrap();
                Ok(Segmentation { word: word.to_string(), pieces })
            }
        }
    }

    /// Maximum-probability segmentation.
    pub fn segment_viterbi(&self, word: &str) -> Result<Segmentation> {
        let (pieces, _) = self.viterbi(word, None)?;
        Ok(Segmentation { word: word.to_string(), pieces })
    }

    /// Viterbi log-probability of `word`.
    pub fn viterbi_score(&self, word: &str) -> Result<f64> {
        Ok(self.viterbi(word, None)?.1)
    }

    /// Best segmentation of a piece's own characters without using that
    /// piece; the pruning loss compares against this.
    pub(crate) fn best_alternative(&self, piece: usize) -> f64 {
        let p = &self.pieces[piece];
        let chars: Vec<char> = p.text.chars().collect();
        self.lattice_viterbi(&chars, p.word_start, Some(piece)).map_or(f64::NEG_INFINITY, |(_, s)| s)
    }

    fn viterbi(&self, word: &str, exclude: Option<usize>) -> Result<(Vec<Unit>, f64)> {
        let chars = self.checked_chars(word)?;
        self.lattice_viterbi(&chars, true, exclude)
            .ok_or_else(|| Error::validation(format!("no segmentation with finite probability for {word:?}")))
    }

    fn lattice_viterbi(&self, chars: &[char], word_start: bool, exclude: Option<usize>) -> Option<(Vec<Unit>, f64)> {
        let n = chars.len();
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        let mut back: Vec<(usize, usize)> = vec![(0, 0); n + 1];
        best[0] = 0.0;
        let mut buf = String::new();
        for end in 1..=n {
            for begin in end.saturating_sub(self.max_chars)..end {
                if best[begin] == f64::NEG_INFINITY {
                    continue;
                }
                buf.clear();
                buf.extend(&chars[begin..end]);
                let Some(pi) = self.lookup(word_start && begin == 0, &buf) else { continue };
                if Some(pi) == exclude {
                    continue;
                }
                let s = best[begin] + self.pieces[pi].log_prob;
                if s > best[end] {
                    best[end] = s;
                    back[end] = (begin, pi);
                }
            }
        }
        if n == 0 || best[n] == f64::NEG_INFINITY {
            return None;
        }
        let mut pieces = Vec::new();
        let mut pos = n;
        while pos > 0 {
            let (begin, pi) = back[pos];
            pieces.push(pi as Unit + 1);
            pos = begin;
        }
        pieces.reverse();
        Some((pieces, best[n]))
    }

    /// Up to `n` best segmentations, best first.
    pub fn nbest_segmentations(&self, word: &str, n: usize) -> Result<Vec<(Vec<Unit>, f64)>> {
        let chars = self.checked_chars(word)?;
        let len = chars.len();
        let mut lists: Vec<Vec<(Vec<Unit>, f64)>> = vec![Vec::new(); len + 1];
        lists[0].push((Vec::new(), 0.0));
        let mut buf = String::new();
        for end in 1..=len {
            let mut here = Vec::new();
            for begin in end.saturating_sub(self.max_chars)..end {
                buf.clear();
                buf.extend(&chars[begin..end]);
                let Some(pi) = self.lookup(begin == 0, &buf) else { continue };
                let lp = self.pieces[pi].log_prob;
                for (prefix, s) in &lists[begin] {
                    let mut seq = prefix.clone();
                    seq.push(pi as Unit + 1);
                    here.push((seq, s + lp));
                }
            }
            here.retain(|(_, s)| *s > f64::NEG_INFINITY);
            here.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            here.truncate(n);
            lists[end] = here;
        }
        let out = std::mem::take(&mut lists[len]);
        if out.is_empty() {
            return Err(Error::validation(format!("no segmentation with finite probability for {word:?}")));
        }
        Ok(out)
    }

    fn checked_chars(&self, word: &str) -> Result<Vec<char>> {
        let chars: Vec<char> = word.chars().collect();
        if chars.is_empty() {
            return Err(Error::config("cannot segment an empty word"));
        }
        if let Some(&c) = chars.iter().find(|c| !self.alphabet.contains(c)) {
            return Err(Error::Oov { ch: c, word: word.to_string() });
        }
        Ok(chars)
    }

    /// Names of the given units, joined by spaces.
    pub fn render(&self, units: &[Unit]) -> Vec<String> {
        units.iter().map(|&u| self.piece_name(u).unwrap_or_else(|| format!("<{u}>"))).collect()
    }

    /// `piece<TAB>log_prob` lines in unit order.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.pieces {
            writeln!(w, "{}\t{}", p.name(), p.log_prob)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (name, lp) =
                line.split_once('\t').ok_or_else(|| Error::parse(idx + 1, "expected `piece<TAB>log_prob`"))?;
            let lp: f64 =
                lp.trim().parse().map_err(|_| Error::parse(idx + 1, format!("bad log-probability {lp:?}")))?;
            entries.push((name.to_string(), lp));
        }
        Self::from_names(&entries)
    }
}

/// Joins pieces into text: a space precedes every word-start piece after
/// the first, and markers are removed.
pub fn detokenize<S: AsRef<str>>(pieces: &[S]) -> String {
    let mut out = String::new();
    for p in pieces {
        let p = p.as_ref();
        match p.strip_prefix(WORD_START) {
            Some(rest) => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(rest);
            }
            None => out.push_str(p),
        }
    }
    out
}
