use std::collections::BTreeMap;

use wpctc_core::ctc::Posteriorgram;
use wpctc_core::fst::{Label, Wfst, EPSILON};

/// Best total cost of every word sequence the graph can produce while
/// reading exactly one emitting arc per frame, by enumerating all paths.
/// Input label `l` reads column `l - 1`. Needs an ε-input-acyclic graph.
pub fn exhaustive_decode(g: &Wfst, post: &Posteriorgram, acoustic_scale: f64) -> BTreeMap<Vec<Label>, f64> {
    let mut best: BTreeMap<Vec<Label>, f64> = BTreeMap::new();
    let Some(start) = g.start() else {
        return best;
    };
    let mut stack = vec![(start, 0usize, 0.0f64, Vec::new(), 0usize)];
    while let Some((s, t, cost, words, eps_run)) = stack.pop() {
        assert!(eps_run <= g.num_states(), "ε-input cycle");
        if t == post.frames() && g.is_final(s) {
            let total = cost + g.final_weight(s);
            let e = best.entry(words.clone()).or_insert(f64::INFINITY);
            *e = e.min(total);
        }
        for a in g.arcs(s) {
            let mut w2 = words.clone();
            if a.olabel != EPSILON {
                w2.push(a.olabel);
            }
            if a.ilabel == EPSILON {
                stack.push((a.nextstate, t, cost + a.weight, w2, eps_run + 1));
            } else if t < post.frames() {
                let am = -acoustic_scale * post.get(t, a.ilabel - 1);
                stack.push((a.nextstate, t + 1, cost + a.weight + am, w2, 0));
            }
        }
    }
    best
}
