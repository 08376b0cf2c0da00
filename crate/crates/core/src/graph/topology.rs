use crate::ctc::{Unit, BLANK};
use crate::error::{Error, Result};
use crate::fst::{Arc, Label, Semiring, StateId, SymbolTable, Wfst, EPSILON};

/// Graph input label of an acoustic unit. Label 0 is ε, so unit `u`
/// (blank included) is label `u + 1`.
pub fn unit_label(unit: Unit) -> Label {
    unit + 1
}

/// Acoustic unit read by an input label, `None` for ε.
pub fn label_unit(label: Label) -> Option<Unit> {
    label.checked_sub(1)
}

pub const BLANK_LABEL: Label = BLANK + 1;

/// Input table for frame-level graphs: `<eps>`, `<blank>`, then `names`
/// so that the symbol of label `unit_label(u)` is unit `u`'s name.
pub fn frame_symbols<S: AsRef<str>>(names: &[S]) -> SymbolTable {
    let mut t = SymbolTable::new();
    t.add("<blank>");
    for n in names {
        t.add(n.as_ref());
    }
    t
}

/// Unit table: `<eps>` then `names`, so unit `u` has id `u`.
pub fn unit_symbols<S: AsRef<str>>(names: &[S]) -> SymbolTable {
    let mut t = SymbolTable::new();
    for n in names {
        t.add(n.as_ref());
    }
    t
}

/// CTC topology for `n_units` non-blank units. Reads frame labels and
/// writes each unit once per run of identical frames; blanks are read and
/// write nothing. State 0 means "last frame was blank (or none yet)",
/// state `u` means "last frame was unit `u`".
pub fn build_h_wordpiece(n_units: usize) -> Result<Wfst> {
    if n_units == 0 {
        return Err(Error::config("H needs at least one non-blank unit"));
    }
    let mut h = Wfst::new(Semiring::Tropical);
    h.add_states(n_units + 1);
    h.set_start(0);
    for s in 0..=n_units as StateId {
        h.set_final(s, 0.0);
        h.add_arc(s, Arc::new(BLANK_LABEL, EPSILON, 0.0, 0));
        for u in 1..=n_units as Unit {
            let olabel = if u == s { EPSILON } else { u };
            h.add_arc(s, Arc::new(unit_label(u), olabel, 0.0, u));
        }
    }
    Ok(h)
}

/// One-state HMM topology per unit, as a conventional hybrid system would
/// build it: entering a unit writes it, its self-loop writes nothing and
/// an ε arc returns to the hub. Has no blank; see [`ctc_convert`].
pub fn build_hmm_h(n_units: usize) -> Result<Wfst> {
    if n_units == 0 {
        return Err(Error::config("H needs at least one unit"));
    }
    let mut h = Wfst::new(Semiring::Tropical);
    h.add_states(n_units + 1);
    h.set_start(0);
    h.set_final(0, 0.0);
    for u in 1..=n_units as Unit {
        h.add_arc(0, Arc::new(unit_label(u), u, 0.0, u));
        h.add_arc(u, Arc::new(unit_label(u), EPSILON, 0.0, u));
        h.add_arc(u, Arc::new(EPSILON, EPSILON, 0.0, 0));
    }
    Ok(h)
}

/// Makes a blank-free frame-level graph CTC compatible. State `s` keeps
/// its incoming arcs and self-loops and gains a `blank:ε` self-loop; a new
/// state `s' = N + s` takes over the other outgoing arcs and is reached
/// from `s` by an `ε:ε` arc. Both halves inherit finality. The result has
/// exactly `2N` states and `A + 2N` arcs.
pub fn ctc_convert(g: &Wfst, blank: Label) -> Result<Wfst> {
    if blank == EPSILON {
        return Err(Error::config("blank label must differ from epsilon"));
    }
    let n = g.num_states() as StateId;
    for s in g.states() {
        if g.arcs(s).iter().any(|a| a.ilabel == blank) {
            return Err(Error::validation(format!("state {s} already has an arc reading the blank label {blank}")));
        }
    }
    let k = g.semiring();
    let mut out = Wfst::new(k);
    out.add_states(2 * n as usize);
    for s in g.states() {
        let split = n + s;
        out.add_arc(s, Arc::new(blank, EPSILON, k.one(), s));
        out.add_arc(s, Arc::new(EPSILON, EPSILON, k.one(), split));
        for a in g.arcs(s) {
            let from = if a.nextstate == s { s } else { split };
            out.add_arc(from, *a);
        }
        if g.is_final(s) {
            out.set_final(s, g.final_weight(s));
            out.set_final(split, g.final_weight(s));
        }
    }
    if let Some(s) = g.start() {
        out.set_start(s);
    }
    out.set_isymbols(g.isymbols().cloned());
    out.set_osymbols(g.osymbols().cloned());
    out.arc_sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_conversion() {
        let mut g = Wfst::new(Semiring::Tropical);
        g.add_state();
        g.set_start(0);
        g.set_final(0, 0.0);
        g.add_arc(0, Arc::new(2, 2, 0.0, 0));
        let c = ctc_convert(&g, BLANK_LABEL).unwrap();
        assert_eq!(c.num_states(), 2);
        assert_eq!(c.num_arcs(), 3);
        let mut labels: Vec<(Label, Label, StateId)> =
            c.arcs(0).iter().map(|a| (a.ilabel, a.olabel, a.nextstate)).collect();
        labels.sort();
        assert_eq!(labels, vec![(0, 0, 1), (1, 0, 0), (2, 2, 0)]);
        assert!(c.is_final(0) && c.is_final(1));
    }

    #[test]
    fn blank_in_input_is_rejected() {
        let mut g = Wfst::new(Semiring::Tropical);
        g.add_states(2);
        g.set_start(0);
        g.add_arc(0, Arc::new(BLANK_LABEL, 3, 0.0, 1));
        assert!(matches!(ctc_convert(&g, BLANK_LABEL), Err(Error::Validation(_))));
    }

    #[test]
    fn h_sizes() {
        let h = build_h_wordpiece(3).unwrap();
        assert_eq!(h.num_states(), 4);
        assert_eq!(h.num_arcs(), 4 * 4);
        assert!(build_h_wordpiece(0).is_err());
        assert_eq!(build_hmm_h(2).unwrap().num_arcs(), 6);
    }

    #[test]
    fn symbol_tables_line_up() {
        let f = frame_symbols(&["_a", "b"]);
        assert_eq!(f.find("<blank>"), Some(BLANK_LABEL));
        assert_eq!(f.find("b"), Some(unit_label(2)));
        assert_eq!(unit_symbols(&["_a", "b"]).find("b"), Some(2));
        assert_eq!(label_unit(0), None);
        assert_eq!(label_unit(BLANK_LABEL), Some(BLANK));
    }
}
