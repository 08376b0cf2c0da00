use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::warn;

use crate::ctc::Unit;
use crate::error::{Error, Result};
use crate::fst::{Arc, Semiring, SymbolTable, Wfst, EPSILON};
use crate::wordpiece::WordpieceModel;

/// Word → unit-sequence pronunciations, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    words: Vec<(String, Vec<Vec<Unit>>)>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pronunciation. Duplicate pronunciations of a word are ignored.
    pub fn add(&mut self, word: &str, units: Vec<Unit>) -> Result<()> {
        if units.is_empty() {
            return Err(Error::validation(format!("empty pronunciation for {word:?}")));
        }
        if units.contains(&crate::ctc::BLANK) {
            return Err(Error::validation(format!("pronunciation of {word:?} uses the blank unit")));
        }
        let i = *self.index.entry(word.to_string()).or_insert_with(|| {
            self.words.push((word.to_string(), Vec::new()));
            self.words.len() - 1
        });
        let prons = &mut self.words[i].1;
        if !prons.contains(&units) {
            prons.push(units);
        }
        Ok(())
    }

    /// Lexicon of the Viterbi segmentation of each word.
    pub fn from_wordpiece<'a>(model: &WordpieceModel, words: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut lex = Lexicon::new();
        for w in words {
            lex.add(w, model.segment_viterbi(w)?.pieces)?;
        }
        Ok(lex)
    }

    /// Character lexicon: unit of each character is looked up in `units`.
    pub fn graphemes<'a>(units: &SymbolTable, words: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut lex = Lexicon::new();
        for w in words {
            let pron = w
                .chars()
                .map(|c| units.find(&c.to_string()).ok_or_else(|| Error::Oov { ch: c, word: w.to_string() }))
                .collect::<Result<Vec<_>>>()?;
            lex.add(w, pron)?;
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Vec<Unit>]> {
        self.index.get(word).map(|&i| self.words[i].1.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Vec<Unit>])> {
        self.words.iter().map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    /// `word unit1 unit2 ...` per pronunciation, using `units` for names.
    pub fn write_text<W: Write>(&self, mut w: W, units: &SymbolTable) -> Result<()> {
        for (word, prons) in &self.words {
            for pron in prons {
                write!(w, "{word}")?;
                for &u in pron {
                    write!(w, " {}", units.symbol(u).unwrap_or("<unk>"))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, units: &SymbolTable) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let pron = fields
                .map(|f| units.find(f).ok_or_else(|| Error::parse(i + 1, format!("unknown unit {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if pron.is_empty() {
                return Err(Error::parse(i + 1, format!("no units for {word:?}")));
            }
            lex.add(word, pron)?;
        }
        Ok(lex)
    }
}

/// Lexicon transducer: unit sequences to words, closed under
/// concatenation. Every pronunciation is its own path out of (and back
/// into) the single start/final state; the word is emitted on the first
/// arc. Input labels are unit ids and `units` becomes the input table.
pub fn build_l(lexicon: &Lexicon, units: &SymbolTable, words: &SymbolTable) -> Result<Wfst> {
    if lexicon.is_empty() {
        return Err(Error::EmptyGraph("lexicon has no entries".into()));
    }
    let mut g = Wfst::new(Semiring::Tropical);
    let root = g.add_state();
    g.set_start(root);
    g.set_final(root, 0.0);
    for (word, prons) in lexicon.iter() {
        let Some(wid) = words.find(word) else {
            warn!("lexicon word {word:?} has no word symbol; skipped");
            continue;
        };
        for pron in prons {
            if let Some(&u) = pron.iter().find(|&&u| u as usize >= units.len()) {
                return Err(Error::validation(format!("{word:?} uses unit {u} outside the unit table")));
            }
            let mut src = root;
            for (k, &u) in pron.iter().enumerate() {
                let dst = if k + 1 == pron.len() { root } else { g.add_state() };
                let olabel = if k == 0 { wid } else { EPSILON };
                g.add_arc(src, Arc::new(u, olabel, 0.0, dst));
                src = dst;
            }
        }
    }
    g.set_isymbols(Some(units.clone()));
    g.set_osymbols(Some(words.clone()));
    g.arc_sort();
    Ok(g)
}
