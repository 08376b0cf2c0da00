use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

use super::semiring::{Semiring, Weight};
use super::wfst::Wfst;
use super::{Label, StateId, EPSILON};

/// One accepting path. Label vectors omit ε.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub states: Vec<StateId>,
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub weight: Weight,
}

#[derive(Debug, Clone)]
struct Partial {
    weight: Weight,
    states: Vec<StateId>,
    arcs: Vec<u32>,
    complete: bool,
}

impl Partial {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| self.states.cmp(&other.states))
            .then_with(|| self.arcs.cmp(&other.arcs))
            .then_with(|| self.complete.cmp(&other.complete))
    }

    fn extend(&self, g: &Wfst, arc_idx: usize) -> Partial {
        let s = *self.states.last().unwrap();
        let arc = g.arcs(s)[arc_idx];
        let mut states = self.states.clone();
        states.push(arc.nextstate);
        let mut arcs = self.arcs.clone();
        arcs.push(arc_idx as u32);
        Partial { weight: self.weight + arc.weight, states, arcs, complete: false }
    }

    fn into_path(self, g: &Wfst) -> Path {
        let mut ilabels = Vec::new();
        let mut olabels = Vec::new();
        for (s, &ai) in self.states.iter().zip(&self.arcs) {
            let arc = g.arcs(*s)[ai as usize];
            if arc.ilabel != EPSILON {
                ilabels.push(arc.ilabel);
            }
            if arc.olabel != EPSILON {
                olabels.push(arc.olabel);
            }
        }
        Path { states: self.states, ilabels, olabels, weight: self.weight }
    }
}

struct HeapEntry(Partial);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.key_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key_cmp(&self.0)
    }
}

/// Up to `n` lowest-weight accepting paths in ascending weight order, ties
/// broken by the lexicographic state-id sequence.
///
/// Acyclic graphs are solved exactly for arbitrary weights. Cyclic graphs
/// require non-negative arc weights.
pub fn shortest_path(g: &Wfst, n: usize) -> Result<Vec<Path>> {
    if g.semiring() != Semiring::Tropical {
        return Err(Error::config("shortest_path requires the tropical semiring"));
    }
    let Some(start) = g.start() else {
        return Ok(Vec::new());
    };
    if n == 0 {
        return Ok(Vec::new());
    }
    let root = Partial { weight: 0.0, states: vec![start], arcs: Vec::new(), complete: false };
    let mut done = match topological_order(g, start) {
        Some(order) => acyclic_nbest(g, root, &order, n),
        None => {
            if g.states().flat_map(|s| g.arcs(s)).any(|a| a.weight < 0.0) {
                return Err(Error::config("shortest_path on a cyclic graph needs non-negative weights"));
            }
            best_first_nbest(g, root, n)
        }
    };
    done.sort_by(Partial::key_cmp);
    done.truncate(n);
    Ok(done.into_iter().map(|p| p.into_path(g)).collect())
}

fn acyclic_nbest(g: &Wfst, root: Partial, order: &[StateId], n: usize) -> Vec<Partial> {
    let mut lists: Vec<Vec<Partial>> = vec![Vec::new(); g.num_states()];
    lists[root.states[0] as usize].push(root);
    let mut done = Vec::new();
    for &s in order {
        let mut here = std::mem::take(&mut lists[s as usize]);
        here.sort_by(Partial::key_cmp);
        here.truncate(n);
        for p in &here {
            for ai in 0..g.arcs(s).len() {
                let next = p.extend(g, ai);
                lists[*next.states.last().unwrap() as usize].push(next);
            }
        }
        if g.is_final(s) {
            for mut p in here {
                p.weight += g.final_weight(s);
                p.complete = true;
                done.push(p);
            }
        }
    }
    done
}

fn best_first_nbest(g: &Wfst, root: Partial, n: usize) -> Vec<Partial> {
    let mut pops = vec![0usize; g.num_states()];
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry(root));
    let mut done = Vec::new();
    while let Some(HeapEntry(p)) = heap.pop() {
        if p.complete {
            done.push(p);
            if done.len() == n {
                break;
            }
            continue;
        }
        let s = *p.states.last().unwrap();
        if pops[s as usize] >= n {
            continue;
        }
        pops[s as usize] += 1;
        if g.is_final(s) {
            let mut fin = p.clone();
            fin.weight += g.final_weight(s);
            fin.complete = true;
            heap.push(HeapEntry(fin));
        }
        for ai in 0..g.arcs(s).len() {
            heap.push(HeapEntry(p.extend(g, ai)));
        }
    }
    done
}

/// Topological order of the states reachable from `start`, or `None` if a
/// reachable cycle exists.
fn topological_order(g: &Wfst, start: StateId) -> Option<Vec<StateId>> {
    let n = g.num_states();
    let mut reachable = vec![false; n];
    let mut stack = vec![start];
    reachable[start as usize] = true;
    while let Some(s) = stack.pop() {
        for a in g.arcs(s) {
            if !reachable[a.nextstate as usize] {
                reachable[a.nextstate as usize] = true;
                stack.push(a.nextstate);
            }
        }
    }
    let mut indegree = vec![0usize; n];
    for s in g.states().filter(|&s| reachable[s as usize]) {
        for a in g.arcs(s) {
            indegree[a.nextstate as usize] += 1;
        }
    }
    let mut ready: Vec<StateId> = vec![start];
    let mut order = Vec::new();
    if indegree[start as usize] != 0 {
        return None;
    }
    while let Some(s) = ready.pop() {
        order.push(s);
        for a in g.arcs(s) {
            let t = a.nextstate as usize;
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.push(a.nextstate);
            }
        }
    }
    let reachable_count = reachable.iter().filter(|&&r| r).count();
    (order.len() == reachable_count).then_some(order)
}
