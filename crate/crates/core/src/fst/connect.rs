use super::wfst::{Arc, Wfst};
use super::StateId;

/// Removes every state that is not both reachable from the start and able
/// to reach a final state. Surviving states keep their relative order.
pub fn connect(g: &Wfst) -> Wfst {
    let n = g.num_states();
    let mut out = Wfst::new(g.semiring());
    out.set_isymbols(g.isymbols().cloned());
    out.set_osymbols(g.osymbols().cloned());
    let Some(start) = g.start() else {
        return out;
    };

    let mut access = vec![false; n];
    let mut stack = vec![start];
    access[start as usize] = true;
    while let Some(s) = stack.pop() {
        for a in g.arcs(s) {
            if !access[a.nextstate as usize] {
                access[a.nextstate as usize] = true;
                stack.push(a.nextstate);
            }
        }
    }

    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in g.states() {
        for a in g.arcs(s) {
            reverse[a.nextstate as usize].push(s);
        }
    }
    let mut coaccess = vec![false; n];
    let mut stack: Vec<StateId> = g.states().filter(|&s| g.is_final(s)).collect();
    for &s in &stack {
        coaccess[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s as usize] {
            if !coaccess[p as usize] {
                coaccess[p as usize] = true;
                stack.push(p);
            }
        }
    }

    let mut remap = vec![None; n];
    for s in 0..n {
        if access[s] && coaccess[s] {
            remap[s] = Some(out.add_state());
        }
    }
    let Some(new_start) = remap[start as usize] else {
        return out;
    };
    out.set_start(new_start);
    for s in g.states() {
        let Some(ns) = remap[s as usize] else { continue };
        out.set_final(ns, g.final_weight(s));
        for a in g.arcs(s) {
            if let Some(nt) = remap[a.nextstate as usize] {
                out.add_arc(ns, Arc { nextstate: nt, ..*a });
            }
        }
    }
    out
}
