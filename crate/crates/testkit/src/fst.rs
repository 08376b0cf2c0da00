use std::collections::BTreeMap;

use rand::Rng;
use wpctc_core::fst::{Arc, Label, Semiring, Wfst, EPSILON};

/// (input string, output string) → ⊕ of the weights of all paths with
/// those strings. ε labels are dropped from the strings.
pub type Language = BTreeMap<(Vec<Label>, Vec<Label>), f64>;

/// Enumerates every accepting path whose input and output strings stay
/// within the given lengths. Termination requires the graph to have no
/// cycle that leaves both strings unchanged.
pub fn language(g: &Wfst, max_in: usize, max_out: usize) -> Language {
    let mut lang = Language::new();
    let Some(start) = g.start() else {
        return lang;
    };
    let k = g.semiring();
    let mut stack = vec![(start, Vec::new(), Vec::new(), 0.0f64, 0usize)];
    while let Some((s, ins, outs, w, depth)) = stack.pop() {
        assert!(depth < 10_000, "path enumeration did not terminate");
        if g.is_final(s) {
            let total = w + g.final_weight(s);
            let e = lang.entry((ins.clone(), outs.clone())).or_insert(k.zero());
            *e = k.plus(*e, total);
        }
        for a in g.arcs(s) {
            let mut i2 = ins.clone();
            let mut o2 = outs.clone();
            if a.ilabel != EPSILON {
                i2.push(a.ilabel);
            }
            if a.olabel != EPSILON {
                o2.push(a.olabel);
            }
            if i2.len() > max_in || o2.len() > max_out {
                continue;
            }
            stack.push((a.nextstate, i2, o2, w + a.weight, depth + 1));
        }
    }
    lang
}

/// Relational composition of two enumerated languages.
pub fn compose_languages(a: &Language, b: &Language, k: Semiring) -> Language {
    let mut out = Language::new();
    for ((x, y), wa) in a {
        for ((y2, z), wb) in b {
            if y == y2 {
                let e = out.entry((x.clone(), z.clone())).or_insert(k.zero());
                *e = k.plus(*e, wa + wb);
            }
        }
    }
    out
}

/// Keeps only entries whose strings fit the bounds.
pub fn restrict(lang: &Language, max_in: usize, max_out: usize) -> Language {
    lang.iter().filter(|((i, o), _)| i.len() <= max_in && o.len() <= max_out).map(|(k, v)| (k.clone(), *v)).collect()
}

/// Describes the first disagreement between two languages, if any.
pub fn language_diff(a: &Language, b: &Language, tol: f64) -> Option<String> {
    for (key, wa) in a {
        match b.get(key) {
            None => return Some(format!("{key:?} only in left (weight {wa})")),
            Some(wb) if !close(*wa, *wb, tol) => return Some(format!("{key:?}: {wa} vs {wb}")),
            _ => {}
        }
    }
    for (key, wb) in b {
        if !a.contains_key(key) {
            return Some(format!("{key:?} only in right (weight {wb})"));
        }
    }
    None
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

#[derive(Debug, Clone, Copy)]
pub struct RandomFstSpec {
    pub states: usize,
    /// Non-ε labels are drawn from 1..=labels.
    pub labels: u32,
    pub max_arcs_per_state: usize,
    pub input_epsilon_prob: f64,
    pub output_epsilon_prob: f64,
    pub final_prob: f64,
    /// Only allow arcs from lower to higher state ids.
    pub acyclic: bool,
    pub semiring: Semiring,
}

impl Default for RandomFstSpec {
    fn default() -> Self {
        RandomFstSpec {
            states: 4,
            labels: 3,
            max_arcs_per_state: 3,
            input_epsilon_prob: 0.0,
            output_epsilon_prob: 0.0,
            final_prob: 0.5,
            acyclic: false,
            semiring: Semiring::Tropical,
        }
    }
}

/// Random transducer with non-negative weights and no `ε:ε` cycle.
pub fn random_fst<R: Rng>(rng: &mut R, spec: &RandomFstSpec) -> Wfst {
    loop {
        let mut g = Wfst::new(spec.semiring);
        g.add_states(spec.states);
        g.set_start(0);
        let mut any_final = false;
        for s in 0..spec.states as u32 {
            if rng.random_bool(spec.final_prob) {
                g.set_final(s, (rng.random_range(0..8) as f64) * 0.25);
                any_final = true;
            }
            if spec.acyclic && s as usize == spec.states - 1 {
                continue;
            }
            let n = rng.random_range(0..=spec.max_arcs_per_state);
            for _ in 0..n {
                let lo = if spec.acyclic { s as usize + 1 } else { 0 };
                let dst = rng.random_range(lo..spec.states) as u32;
                let il =
                    if rng.random_bool(spec.input_epsilon_prob) { EPSILON } else { rng.random_range(1..=spec.labels) };
                let ol =
                    if rng.random_bool(spec.output_epsilon_prob) { EPSILON } else { rng.random_range(1..=spec.labels) };
                let w = rng.random_range(0..16) as f64 * 0.125 + rng.random_range(0.0..0.01);
                g.add_arc(s, Arc::new(il, ol, w, dst));
            }
        }
        if !any_final {
            g.set_final((spec.states - 1) as u32, 0.0);
        }
        if !g.has_epsilon_cycle() {
            return g;
        }
    }
}

/// All accepting paths as (state sequence, weight), exhaustive; acyclic
/// graphs only.
pub fn all_paths(g: &Wfst) -> Vec<(Vec<u32>, f64)> {
    let mut out = Vec::new();
    let Some(start) = g.start() else {
        return out;
    };
    let mut stack = vec![(vec![start], 0.0f64)];
    while let Some((states, w)) = stack.pop() {
        let s = *states.last().unwrap();
        assert!(states.len() <= g.num_states() + 1, "all_paths needs an acyclic graph");
        if g.is_final(s) {
            out.push((states.clone(), w + g.final_weight(s)));
        }
        for a in g.arcs(s) {
            let mut next = states.clone();
            next.push(a.nextstate);
            stack.push((next, w + a.weight));
        }
    }
    out
}
