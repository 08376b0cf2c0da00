use crate::error::{Error, Result};

use super::semiring::{Semiring, Weight};
use super::symbols::SymbolTable;
use super::{Label, StateId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: Weight,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: Weight, nextstate: StateId) -> Self {
        Arc { ilabel, olabel, weight, nextstate }
    }
}

/// Mutable-during-construction weighted transducer with dense state ids.
///
/// Arcs live in per-state vectors. After [`Wfst::arc_sort`] each vector is
/// ordered by input label (stable, so insertion order breaks ties), which
/// enables [`Wfst::arcs_with_ilabel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Wfst {
    semiring: Semiring,
    start: Option<StateId>,
    finals: Vec<Weight>,
    arcs: Vec<Vec<Arc>>,
    sorted: bool,
    isymbols: Option<SymbolTable>,
    osymbols: Option<SymbolTable>,
}

impl Wfst {
    pub fn new(semiring: Semiring) -> Self {
        Wfst {
            semiring,
            start: None,
            finals: Vec::new(),
            arcs: Vec::new(),
            sorted: true,
            isymbols: None,
            osymbols: None,
        }
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    pub fn add_state(&mut self) -> StateId {
        let id = self.finals.len() as StateId;
        self.finals.push(self.semiring.zero());
        self.arcs.push(Vec::new());
        id
    }

    pub fn add_states(&mut self, n: usize) {
        for _ in 0..n {
            self.add_state();
        }
    }

    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.num_states() as StateId
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!((s as usize) < self.num_states(), "start state {s} out of range");
        self.start = Some(s);
    }

    /// Final weight of `s`; semiring zero when `s` is not final.
    pub fn final_weight(&self, s: StateId) -> Weight {
        self.finals[s as usize]
    }

    pub fn is_final(&self, s: StateId) -> bool {
        !self.semiring.is_zero(self.finals[s as usize])
    }

    pub fn set_final(&mut self, s: StateId, w: Weight) {
        self.finals[s as usize] = w;
    }

    pub fn add_arc(&mut self, s: StateId, arc: Arc) {
        assert!((arc.nextstate as usize) < self.num_states(), "arc target {} out of range", arc.nextstate);
        let list = &mut self.arcs[s as usize];
        if let Some(last) = list.last() {
            if last.ilabel > arc.ilabel {
                self.sorted = false;
            }
        }
        list.push(arc);
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.arcs[s as usize]
    }

    pub fn is_arc_sorted(&self) -> bool {
        self.sorted
    }

    /// Stable sort of every state's arcs by input label.
    pub fn arc_sort(&mut self) {
        if self.sorted {
            return;
        }
        for list in &mut self.arcs {
            list.sort_by_key(|a| a.ilabel);
        }
        self.sorted = true;
    }

    /// Arcs leaving `s` with input label `ilabel`. Requires arc-sorted input.
    pub fn arcs_with_ilabel(&self, s: StateId, ilabel: Label) -> &[Arc] {
        debug_assert!(self.sorted, "arcs_with_ilabel on unsorted fst");
        let list = &self.arcs[s as usize];
        let lo = list.partition_point(|a| a.ilabel < ilabel);
        let hi = lo + list[lo..].partition_point(|a| a.ilabel == ilabel);
        &list[lo..hi]
    }

    pub fn isymbols(&self) -> Option<&SymbolTable> {
        self.isymbols.as_ref()
    }

    pub fn osymbols(&self) -> Option<&SymbolTable> {
        self.osymbols.as_ref()
    }

    pub fn set_isymbols(&mut self, table: Option<SymbolTable>) {
        self.isymbols = table;
    }

    pub fn set_osymbols(&mut self, table: Option<SymbolTable>) {
        self.osymbols = table;
    }

    /// Largest input label used on any arc, or 0 for an arc-less graph.
    pub fn max_ilabel(&self) -> Label {
        self.arcs.iter().flatten().map(|a| a.ilabel).max().unwrap_or(0)
    }

    /// Checks the structural invariants: valid arc targets and a start
    /// state whenever the graph is non-empty.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_states();
        if n > 0 && self.start.is_none() {
            return Err(Error::validation("non-empty fst without a start state"));
        }
        for (s, list) in self.arcs.iter().enumerate() {
            for a in list {
                if a.nextstate as usize >= n {
                    return Err(Error::validation(format!("arc from {s} targets missing state {}", a.nextstate)));
                }
            }
        }
        Ok(())
    }

    /// Returns true when some cycle consists only of `ε:ε` arcs.
    pub fn has_epsilon_cycle(&self) -> bool {
        self.has_cycle_where(|a| a.ilabel == 0 && a.olabel == 0)
    }

    /// Returns true when the graph (restricted to arcs satisfying `keep`)
    /// contains a cycle.
    pub fn has_cycle_where(&self, keep: impl Fn(&Arc) -> bool) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.num_states();
        let mut color = vec![0u8; n];
        for root in 0..n {
            if color[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            color[root] = 1;
            while let Some(&mut (s, ref mut next)) = stack.last_mut() {
                let list = &self.arcs[s];
                if *next < list.len() {
                    let a = list[*next];
                    *next += 1;
                    if !keep(&a) {
                        continue;
                    }
                    let t = a.nextstate as usize;
                    match color[t] {
                        0 => {
                            color[t] = 1;
                            stack.push((t, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    color[s] = 2;
                    stack.pop();
                }
            }
        }
        false
    }

    pub fn is_acyclic(&self) -> bool {
        !self.has_cycle_where(|_| true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcs_with_ilabel_finds_runs() {
        let mut f = Wfst::new(Semiring::Tropical);
        f.add_states(2);
        f.set_start(0);
        f.add_arc(0, Arc::new(3, 1, 0.0, 1));
        f.add_arc(0, Arc::new(1, 1, 0.0, 1));
        f.add_arc(0, Arc::new(3, 2, 0.5, 0));
        assert!(!f.is_arc_sorted());
        f.arc_sort();
        let hits = f.arcs_with_ilabel(0, 3);
        assert_eq!(hits.len(), 2);
        // stable: insertion order survives among equal labels
        assert_eq!(hits[0].olabel, 1);
        assert_eq!(hits[1].olabel, 2);
        assert!(f.arcs_with_ilabel(0, 2).is_empty());
    }

    #[test]
    fn detects_epsilon_cycles_only() {
        let mut f = Wfst::new(Semiring::Tropical);
        f.add_states(2);
        f.set_start(0);
        f.add_arc(0, Arc::new(0, 0, 0.0, 1));
        f.add_arc(1, Arc::new(1, 0, 0.0, 0));
        assert!(!f.has_epsilon_cycle());
        f.add_arc(1, Arc::new(0, 0, 0.0, 0));
        assert!(f.has_epsilon_cycle());
    }

    #[test]
    fn validate_requires_start() {
        let mut f = Wfst::new(Semiring::Log);
        assert!(f.validate().is_ok());
        f.add_state();
        assert!(f.validate().is_err());
        f.set_start(0);
        assert!(f.validate().is_ok());
    }
}
