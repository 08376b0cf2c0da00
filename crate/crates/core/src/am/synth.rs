//! Synthetic speech-like corpora: a bigram word grammar, one prototype
//! feature vector per character plus silence, and noisy frames.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wordpiece::WordCounts;

use super::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub words: Vec<String>,
    pub utterances: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every frame.
    pub noise: f64,
    /// Inclusive range of frames per character.
    pub frames_per_char: [usize; 2],
    /// Inclusive range of silence frames between words.
    pub pause_frames: [usize; 2],
    /// Inclusive range of silence frames at each end.
    pub edge_frames: [usize; 2],
    /// Successor words each word allows in the grammar.
    pub successors: usize,
    /// Probability of ending the sentence after any word.
    pub end_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            words: Vec::new(),
            utterances: 200,
            min_words: 2,
            max_words: 6,
            feature_dim: 12,
            noise: 0.3,
            frames_per_char: [2, 4],
            pause_frames: [0, 2],
            edge_frames: [2, 4],
            successors: 4,
            end_prob: 0.25,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [usize; 2]| r[0] <= r[1];
        if self.words.is_empty() || self.words.iter().any(|w| w.is_empty() || w.contains(char::is_whitespace)) {
            return Err(Error::config("synthetic language needs non-empty, whitespace-free words"));
        }
        if BTreeSet::from_iter(&self.words).len() != self.words.len() {
            return Err(Error::config("synthetic language has duplicate words"));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::config("need 1 ≤ min_words ≤ max_words"));
        }
        if !(range_ok(self.frames_per_char) && range_ok(self.pause_frames) && range_ok(self.edge_frames)) {
            return Err(Error::config("frame ranges must be [low, high] with low ≤ high"));
        }
        if self.frames_per_char[0] == 0 || self.feature_dim == 0 || self.noise < 0.0 {
            return Err(Error::config("frames_per_char, feature_dim must be positive and noise non-negative"));
        }
        if !(self.end_prob > 0.0 && self.end_prob < 1.0) || self.successors == 0 {
            return Err(Error::config("end_prob must be in (0, 1) and successors positive"));
        }
        Ok(())
    }
}

/// First-order Markov word grammar.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub words: Vec<String>,
    /// Allowed successors of each word with their probabilities (given
    /// that the sentence continues).
    pub next: Vec<Vec<(usize, f64)>>,
    pub end_prob: f64,
}

impl Grammar {
    /// The grammar as a normalized bigram ARPA model: explicit bigrams for
    /// every grammatical transition carry all but `floor` of the mass, the
    /// rest backs off to a uniform unigram. A word that may be followed by
    /// any word gets the whole mass on its bigrams and a -99 back-off.
    pub fn to_arpa(&self, floor: f64) -> String {
        let n = self.words.len();
        let uni = 1.0 / (n + 1) as f64;
        let l10 = |p: f64| p.log10();
        let mut bigrams: Vec<(String, String, f64)> = Vec::new();
        let mut backoff = vec![0.0; n];
        for (h, succ) in self.next.iter().enumerate() {
            let (floor, bo) = if succ.len() >= n {
                (0.0, -99.0)
            } else {
                (floor, l10(floor / (1.0 - (succ.len() + 1) as f64 * uni)))
            };
            backoff[h] = bo;
            for &(w, p) in succ {
                bigrams.push((
                    self.words[h].clone(),
                    self.words[w].clone(),
                    l10((1.0 - floor) * (1.0 - self.end_prob) * p),
                ));
            }
            bigrams.push((self.words[h].clone(), "</s>".into(), l10((1.0 - floor) * self.end_prob)));
        }
        for w in &self.words {
            bigrams.push(("<s>".into(), w.clone(), l10((1.0 - floor) / n as f64)));
        }
        let bos_backoff = l10(floor / uni);

        let mut s = String::from("\\data\\\n");
        writeln!(s, "ngram 1={}", n + 2).unwrap();
        writeln!(s, "ngram 2={}\n", bigrams.len()).unwrap();
        s.push_str("\\1-grams:\n");
        writeln!(s, "-99\t<s>\t{bos_backoff:.6}").unwrap();
        writeln!(s, "{:.6}\t</s>", l10(uni)).unwrap();
        for (w, bo) in self.words.iter().zip(&backoff) {
            writeln!(s, "{:.6}\t{w}\t{bo:.6}", l10(uni)).unwrap();
        }
        s.push_str("\n\\2-grams:\n");
        for (h, w, p) in bigrams {
            writeln!(s, "{p:.6}\t{h} {w}").unwrap();
        }
        s.push_str("\n\\end\\\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub words: Vec<String>,
    pub features: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Characters in prototype order; prototype 0 is silence.
    pub symbols: Vec<char>,
    pub prototypes: Vec<Vec<f64>>,
    pub grammar: Grammar,
    pub utterances: Vec<Utterance>,
    /// Prototype index behind every frame of every utterance.
    pub alignments: Vec<Vec<usize>>,
}

impl SynthCorpus {
    pub fn word_counts(&self) -> WordCounts {
        word_counts(&self.utterances)
    }
}

pub fn word_counts(utts: &[Utterance]) -> WordCounts {
    let mut counts = WordCounts::new();
    for u in utts {
        for w in &u.words {
            *counts.entry(w.clone()).or_default() += 1;
        }
    }
    counts
}

/// Deterministic in `spec` (including its seed).
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let symbols: Vec<char> = spec.words.iter().flat_map(|w| w.chars()).collect::<BTreeSet<_>>().into_iter().collect();
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let prototypes: Vec<Vec<f64>> =
        (0..=symbols.len()).map(|_| (0..spec.feature_dim).map(|_| gauss(&mut rng)).collect()).collect();

    let n = spec.words.len();
    let next: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            let mut picks = sample(&mut rng, n, spec.successors.min(n)).into_vec();
            picks.sort_unstable();
            let weights: Vec<f64> = picks.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = weights.iter().sum();
            picks.into_iter().zip(weights).map(|(w, p)| (w, p / total)).collect()
        })
        .collect();
    let grammar = Grammar { words: spec.words.clone(), next, end_prob: spec.end_prob };

    let in_range = |rng: &mut ChaCha8Rng, r: [usize; 2]| rng.random_range(r[0]..=r[1]);
    let mut utterances = Vec::with_capacity(spec.utterances);
    let mut alignments = Vec::with_capacity(spec.utterances);
    for i in 0..spec.utterances {
        let sentence = loop {
            let mut s = vec![rng.random_range(0..n)];
            while !rng.random_bool(spec.end_prob) && s.len() <= spec.max_words {
                let succ = &grammar.next[*s.last().unwrap()];
                let mut x = rng.random::<f64>();
                let mut pick = succ.last().unwrap().0;
                for &(w, p) in succ {
                    if x < p {
                        pick = w;
                        break;
                    }
                    x -= p;
                }
                s.push(pick);
            }
            if (spec.min_words..=spec.max_words).contains(&s.len()) {
                break s;
            }
        };
        let mut align = vec![0; in_range(&mut rng, spec.edge_frames)];
        for (k, &w) in sentence.iter().enumerate() {
            if k > 0 {
                align.extend(std::iter::repeat_n(0, in_range(&mut rng, spec.pause_frames)));
            }
            for c in spec.words[w].chars() {
                let p = symbols.binary_search(&c).unwrap() + 1;
                align.extend(std::iter::repeat_n(p, in_range(&mut rng, spec.frames_per_char)));
            }
        }
        align.extend(std::iter::repeat_n(0, in_range(&mut rng, spec.edge_frames)));
        let mut data = Vec::with_capacity(align.len() * spec.feature_dim);
        for &p in &align {
            data.extend(prototypes[p].iter().map(|&v| v + spec.noise * gauss(&mut rng)));
        }
        utterances.push(Utterance {
            id: format!("utt{i:04}"),
            words: sentence.iter().map(|&w| spec.words[w].clone()).collect(),
            features: FeatureMatrix::new(align.len(), spec.feature_dim, data)?,
        });
        alignments.push(align);
    }
    Ok(SynthCorpus { symbols, prototypes, grammar, utterances, alignments })
}

/// Writes `text` (`utt_id word1 word2 ...`) and `feats/<utt_id>.feat`.
pub fn write_corpus(dir: &Path, utts: &[Utterance]) -> Result<()> {
    fs::create_dir_all(dir.join("feats"))?;
    let mut text = String::new();
    for u in utts {
        writeln!(text, "{} {}", u.id, u.words.join(" ")).unwrap();
        let file = fs::File::create(dir.join("feats").join(format!("{}.feat", u.id)))?;
        u.features.write_binary(std::io::BufWriter::new(file))?;
    }
    fs::write(dir.join("text"), text)?;
    Ok(())
}

pub fn read_corpus(dir: &Path) -> Result<Vec<Utterance>> {
    let text = fs::read_to_string(dir.join("text"))?;
    let mut utts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let path = dir.join("feats").join(format!("{id}.feat"));
        let file = fs::File::open(&path)
            .map_err(|e| Error::parse(i + 1, format!("features for {id} ({}): {e}", path.display())))?;
        utts.push(Utterance {
            id: id.to_string(),
            words: fields.map(String::from).collect(),
            features: FeatureMatrix::read_binary(std::io::BufReader::new(file))?,
        });
    }
    Ok(utts)
}
