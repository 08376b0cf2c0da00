use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ctc::{Posteriorgram, Unit};
use crate::error::{Error, Result};
use crate::fst::{Label, Semiring, StateId, Wfst, EPSILON};
use crate::graph::{label_unit, BLANK_LABEL};

use super::nbest::{Hypothesis, NBestList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// Tokens costlier than the frame's best by more than this are dropped.
    pub beam: f64,
    /// Most states kept per frame.
    pub max_active: usize,
    /// Skip frames whose blank posterior exceeds this; `None` disables.
    /// The first frame of a run of skipped frames moves tokens along blank
    /// arcs only, without acoustic cost; the rest of the run is passed over.
    pub blank_skip: Option<f64>,
    pub acoustic_scale: f64,
    pub nbest: usize,
    /// Record the unit read at every processed frame.
    pub trace_alignment: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: 16.0,
            max_active: 10_000,
            blank_skip: Some(0.99),
            acoustic_scale: 1.0,
            nbest: 1,
            trace_alignment: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam.is_nan() || self.beam <= 0.0 {
            return Err(Error::config(format!("beam must be positive, got {}", self.beam)));
        }
        if self.max_active == 0 {
            return Err(Error::config("max_active must be at least 1"));
        }
        if let Some(t) = self.blank_skip {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::config(format!("blank_skip threshold must be in (0, 1], got {t}")));
            }
        }
        if !(self.acoustic_scale.is_finite() && self.acoustic_scale > 0.0) {
            return Err(Error::config(format!("acoustic_scale must be positive, got {}", self.acoustic_scale)));
        }
        if self.nbest == 0 {
            return Err(Error::config("nbest must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeStats {
    pub frames_total: usize,
    pub frames_skipped: usize,
    /// Arc traversals performed, emitting and ε.
    pub tokens_expanded: u64,
    pub wall_time: f64,
}

impl DecodeStats {
    pub fn rtf(&self, audio_seconds: f64) -> f64 {
        if audio_seconds > 0.0 {
            self.wall_time / audio_seconds
        } else {
            0.0
        }
    }

    pub fn skipped_fraction(&self) -> f64 {
        if self.frames_total == 0 {
            0.0
        } else {
            self.frames_skipped as f64 / self.frames_total as f64
        }
    }

    pub fn merge(&mut self, other: &DecodeStats) {
        self.frames_total += other.frames_total;
        self.frames_skipped += other.frames_skipped;
        self.tokens_expanded += other.tokens_expanded;
        self.wall_time += other.wall_time;
    }
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Token {
    cost: f64,
    acoustic: f64,
    words: u32,
    trace: u32,
    from: StateId,
}

impl Token {
    /// Lower cost first; ties go to the lower predecessor state.
    fn better_than(&self, other: &Token) -> bool {
        match self.cost.total_cmp(&other.cost) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.from < other.from,
        }
    }
}

/// Word histories and alignment traces as shared-prefix arenas.
#[derive(Default)]
struct Arena {
    words: Vec<(u32, Label)>,
    word_ids: HashMap<(u32, Label), u32>,
    trace: Vec<(u32, Unit)>,
}

impl Arena {
    fn push_word(&mut self, parent: u32, w: Label) -> u32 {
        *self.word_ids.entry((parent, w)).or_insert_with(|| {
            self.words.push((parent, w));
            (self.words.len() - 1) as u32
        })
    }

    fn words(&self, mut id: u32) -> Vec<Label> {
        let mut out = Vec::new();
        while id != NIL {
            let (p, w) = self.words[id as usize];
            out.push(w);
            id = p;
        }
        out.reverse();
        out
    }

    fn trace(&self, mut id: u32) -> Vec<Unit> {
        let mut out = Vec::new();
        while id != NIL {
            let (p, u) = self.trace[id as usize];
            out.push(u);
            id = p;
        }
        out.reverse();
        out
    }
}

/// Active states of one frame, each with up to `k` tokens of distinct
/// word history, sorted best first.
struct Frontier {
    slot: Vec<u32>,
    states: Vec<StateId>,
    tokens: Vec<Vec<Token>>,
    k: usize,
}

impl Frontier {
    fn new(num_states: usize, k: usize) -> Self {
        Frontier { slot: vec![NIL; num_states], states: Vec::new(), tokens: Vec::new(), k }
    }

    fn clear(&mut self) {
        for &s in &self.states {
            self.slot[s as usize] = NIL;
        }
        self.states.clear();
        self.tokens.clear();
    }

    /// Returns true if the state's token list changed.
    fn insert(&mut self, s: StateId, tok: Token) -> bool {
        let idx = match self.slot[s as usize] {
            NIL => {
                self.slot[s as usize] = self.states.len() as u32;
                self.states.push(s);
                self.tokens.push(vec![tok]);
                return true;
            }
            i => i as usize,
        };
        let list = &mut self.tokens[idx];
        if let Some(pos) = list.iter().position(|t| t.words == tok.words) {
            if !tok.better_than(&list[pos]) {
                return false;
            }
            list.remove(pos);
        } else if list.len() == self.k {
            if !tok.better_than(list.last().unwrap()) {
                return false;
            }
            list.pop();
        }
        let at = list.iter().position(|t| tok.better_than(t)).unwrap_or(list.len());
        list.insert(at, tok);
        true
    }

    fn best_cost(&self) -> f64 {
        self.tokens.iter().map(|l| l[0].cost).fold(f64::INFINITY, f64::min)
    }

    /// Beam and max-active pruning; leaves states sorted by id.
    fn prune(&mut self, beam: f64, max_active: usize) {
        let cutoff = self.best_cost() + beam;
        let mut entries: Vec<(StateId, Vec<Token>)> = self
            .states
            .drain(..)
            .zip(self.tokens.drain(..))
            .filter_map(|(s, mut l)| {
                self.slot[s as usize] = NIL;
                l.retain(|t| t.cost <= cutoff);
                (!l.is_empty()).then_some((s, l))
            })
            .collect();
        if entries.len() > max_active {
            entries.sort_by(|a, b| a.1[0].cost.total_cmp(&b.1[0].cost).then(a.0.cmp(&b.0)));
            entries.truncate(max_active);
        }
        entries.sort_by_key(|e| e.0);
        for (s, l) in entries {
            self.slot[s as usize] = self.states.len() as u32;
            self.states.push(s);
            self.tokens.push(l);
        }
    }
}

/// A graph prepared for repeated decoding.
pub struct Decoder<'g> {
    graph: Cow<'g, Wfst>,
    start: StateId,
    /// Position of each state in a topological order of the ε-input arcs.
    eps_rank: Vec<u32>,
    max_ilabel: Label,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g Wfst) -> Result<Self> {
        let graph = if graph.is_arc_sorted() {
            Cow::Borrowed(graph)
        } else {
            let mut sorted = graph.clone();
            sorted.arc_sort();
            Cow::Owned(sorted)
        };
        let start = graph.start().ok_or_else(|| Error::EmptyGraph("decoding graph has no start state".into()))?;
        if graph.semiring() != Semiring::Tropical {
            return Err(Error::config("decoding needs a tropical-semiring graph"));
        }
        let n = graph.num_states();
        let mut indegree = vec![0usize; n];
        for s in graph.states() {
            for a in graph.arcs(s).iter().filter(|a| a.ilabel == EPSILON) {
                indegree[a.nextstate as usize] += 1;
            }
        }
        let mut queue: Vec<StateId> = (0..n as StateId).filter(|&s| indegree[s as usize] == 0).collect();
        let mut eps_rank = vec![0u32; n];
        let mut seen = 0;
        while let Some(s) = queue.pop() {
            eps_rank[s as usize] = seen as u32;
            seen += 1;
            for a in graph.arcs(s).iter().filter(|a| a.ilabel == EPSILON) {
                let d = &mut indegree[a.nextstate as usize];
                *d -= 1;
                if *d == 0 {
                    queue.push(a.nextstate);
                }
            }
        }
        if seen < n {
            return Err(Error::EpsilonCycle("decoding graph"));
        }
        let max_ilabel = graph.max_ilabel();
        Ok(Decoder { graph, start, eps_rank, max_ilabel })
    }

    pub fn graph(&self) -> &Wfst {
        &self.graph
    }

    pub fn decode(&self, post: &Posteriorgram, cfg: &DecodeConfig) -> Result<(NBestList, DecodeStats)> {
        cfg.validate()?;
        if self.max_ilabel as usize > post.units() {
            return Err(Error::config(format!(
                "graph reads unit {} but the posteriorgram has only {} units",
                self.max_ilabel - 1,
                post.units()
            )));
        }
        if let Some(isyms) = self.graph.isymbols() {
            if isyms.len() != post.units() + 1 {
                return Err(Error::config(format!(
                    "graph input table has {} units, posteriorgram has {}",
                    isyms.len() - 1,
                    post.units()
                )));
            }
        }
        let clock = Instant::now();
        let g: &Wfst = &self.graph;
        let mut arena = Arena::default();
        let mut stats = DecodeStats { frames_total: post.frames(), ..Default::default() };
        let mut cur = Frontier::new(g.num_states(), cfg.nbest);
        let mut next = Frontier::new(g.num_states(), cfg.nbest);
        cur.insert(self.start, Token { cost: 0.0, acoustic: 0.0, words: NIL, trace: NIL, from: self.start });
        self.close(&mut cur, &mut arena, &mut stats);
        cur.prune(cfg.beam, cfg.max_active);

        let mut prev_skipped = false;
        for t in 0..post.frames() {
            let skip = cfg.blank_skip.is_some_and(|th| post.blank_prob(t) > th);
            if skip && prev_skipped {
                // the run's first frame already took the blank transition
                stats.frames_skipped += 1;
                continue;
            }
            prev_skipped = skip;
            next.clear();
            let row = post.row(t);
            for (i, &s) in cur.states.iter().enumerate() {
                let arcs = if skip { g.arcs_with_ilabel(s, BLANK_LABEL) } else { g.arcs(s) };
                for a in arcs.iter().filter(|a| a.ilabel != EPSILON) {
                    let unit = label_unit(a.ilabel).unwrap();
                    let am = if skip { 0.0 } else { -cfg.acoustic_scale * row[unit as usize] };
                    if am == f64::INFINITY {
                        continue;
                    }
                    for tok in &cur.tokens[i] {
                        stats.tokens_expanded += 1;
                        let words = if a.olabel == EPSILON { tok.words } else { arena.push_word(tok.words, a.olabel) };
                        let trace = if cfg.trace_alignment {
                            arena.trace.push((tok.trace, unit));
                            (arena.trace.len() - 1) as u32
                        } else {
                            NIL
                        };
                        next.insert(
                            a.nextstate,
                            Token {
                                cost: tok.cost + am + a.weight,
                                acoustic: tok.acoustic + am,
                                words,
                                trace,
                                from: s,
                            },
                        );
                    }
                }
            }
            if skip {
                stats.frames_skipped += 1;
            }
            next.prune(cfg.beam, cfg.max_active);
            self.close(&mut next, &mut arena, &mut stats);
            next.prune(cfg.beam, cfg.max_active);
            std::mem::swap(&mut cur, &mut next);
            if cur.states.is_empty() {
                break;
            }
        }

        let mut finals: Vec<(Token, f64)> = Vec::new();
        for (i, &s) in cur.states.iter().enumerate() {
            if g.is_final(s) {
                let fw = g.final_weight(s);
                finals.extend(cur.tokens[i].iter().map(|t| (Token { cost: t.cost + fw, ..*t }, fw)));
            }
        }
        finals.sort_by(|a, b| a.0.cost.total_cmp(&b.0.cost).then(a.0.words.cmp(&b.0.words)));
        let mut seen = std::collections::HashSet::new();
        let osyms = g.osymbols();
        let hypotheses: Vec<Hypothesis> = finals
            .into_iter()
            .filter(|(t, _)| seen.insert(t.words))
            .take(cfg.nbest)
            .map(|(t, _)| {
                let word_ids = arena.words(t.words);
                let words = word_ids
                    .iter()
                    .map(|&w| osyms.and_then(|o| o.symbol(w)).map_or_else(|| w.to_string(), str::to_string))
                    .collect();
                Hypothesis {
                    words,
                    word_ids,
                    acoustic_score: t.acoustic,
                    graph_score: t.cost - t.acoustic,
                    score: t.cost,
                    alignment: cfg.trace_alignment.then(|| arena.trace(t.trace)),
                }
            })
            .collect();
        stats.wall_time = clock.elapsed().as_secs_f64();
        Ok((NBestList { hypotheses }, stats))
    }

    /// Follows ε-input arcs from every active state, in topological order.
    fn close(&self, f: &mut Frontier, arena: &mut Arena, stats: &mut DecodeStats) {
        let g: &Wfst = &self.graph;
        let has_eps = |s: StateId| !g.arcs_with_ilabel(s, EPSILON).is_empty();
        let mut queued: Vec<StateId> = f.states.iter().copied().filter(|&s| has_eps(s)).collect();
        if queued.is_empty() {
            return;
        }
        let mut heap: BinaryHeap<std::cmp::Reverse<(u32, StateId)>> =
            queued.iter().map(|&s| std::cmp::Reverse((self.eps_rank[s as usize], s))).collect();
        queued.sort_unstable();
        let mut toks = Vec::new();
        while let Some(std::cmp::Reverse((_, s))) = heap.pop() {
            toks.clear();
            toks.extend_from_slice(&f.tokens[f.slot[s as usize] as usize]);
            for a in g.arcs_with_ilabel(s, EPSILON) {
                for tok in &toks {
                    stats.tokens_expanded += 1;
                    let words = if a.olabel == EPSILON { tok.words } else { arena.push_word(tok.words, a.olabel) };
                    let nt = Token { cost: tok.cost + a.weight, words, from: s, ..*tok };
                    if f.insert(a.nextstate, nt) && has_eps(a.nextstate) {
                        if let Err(pos) = queued.binary_search(&a.nextstate) {
                            queued.insert(pos, a.nextstate);
                            heap.push(std::cmp::Reverse((self.eps_rank[a.nextstate as usize], a.nextstate)));
                        }
                    }
                }
            }
        }
    }
}

/// Decodes one utterance. Prepares the graph each call; use [`Decoder`]
/// to decode many utterances with one graph.
pub fn decode(post: &Posteriorgram, graph: &Wfst, cfg: &DecodeConfig) -> Result<(NBestList, DecodeStats)> {
    Decoder::new(graph)?.decode(post, cfg)
}
