use std::borrow::Cow;
use std::collections::HashMap;
use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::wfst::{Arc, Wfst};
use super::{StateId, EPSILON};

/// Epsilon filter state. `Free` allows every move; after `a` advances
/// alone on an output-ε arc only further lone `a` moves (or a real match)
/// are allowed, and symmetrically for `b`. Simultaneous ε moves are only
/// allowed from `Free`. This admits exactly one ε-path per pair of
/// component paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Filter {
    Free,
    BOnly,
    AOnly,
}

/// Composition of `a` (left) with `b` (right): the result maps `x` to `z`
/// whenever `a` maps `x` to some `y` and `b` maps `y` to `z`.
///
/// Only the accessible part is constructed. Operands containing a cycle of
/// `ε:ε` arcs are rejected.
pub fn compose(a: &Wfst, b: &Wfst) -> Result<Wfst> {
    if a.semiring() != b.semiring() {
        return Err(Error::config(format!("cannot compose {:?} with {:?} semiring", a.semiring(), b.semiring())));
    }
    if let (Some(out), Some(inp)) = (a.osymbols(), b.isymbols()) {
        if out != inp {
            return Err(Error::SymbolMismatch(format!(
                "left output table has {} symbols, right input table has {}",
                out.len(),
                inp.len()
            )));
        }
    }
    if a.has_epsilon_cycle() {
        return Err(Error::EpsilonCycle("left"));
    }
    if b.has_epsilon_cycle() {
        return Err(Error::EpsilonCycle("right"));
    }

    let k = a.semiring();
    let b: Cow<'_, Wfst> = if b.is_arc_sorted() {
        Cow::Borrowed(b)
    } else {
        let mut sorted = b.clone();
        sorted.arc_sort();
        Cow::Owned(sorted)
    };

    let mut out = Wfst::new(k);
    out.set_isymbols(a.isymbols().cloned());
    out.set_osymbols(b.osymbols().cloned());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(out);
    };

    let mut ids: HashMap<(StateId, StateId, Filter), StateId> = HashMap::new();
    let mut queue: VecDeque<(StateId, StateId, Filter)> = VecDeque::new();
    let mut intern = |key: (StateId, StateId, Filter), out: &mut Wfst, queue: &mut VecDeque<_>| -> StateId {
        *ids.entry(key).or_insert_with(|| {
            let id = out.add_state();
            queue.push_back(key);
            id
        })
    };

    let start = intern((sa, sb, Filter::Free), &mut out, &mut queue);
    out.set_start(start);

    let mut pending: Vec<(StateId, Arc)> = Vec::new();
    let mut current = 0;
    while let Some((qa, qb, filter)) = queue.pop_front() {
        let src = current;
        current += 1;
        out.set_final(src, k.times(a.final_weight(qa), b.final_weight(qb)));

        for ea in a.arcs(qa) {
            if ea.olabel != EPSILON {
                for eb in b.arcs_with_ilabel(qb, ea.olabel) {
                    let dst = intern((ea.nextstate, eb.nextstate, Filter::Free), &mut out, &mut queue);
                    pending.push((src, Arc::new(ea.ilabel, eb.olabel, k.times(ea.weight, eb.weight), dst)));
                }
                continue;
            }
            if filter == Filter::Free {
                for eb in b.arcs_with_ilabel(qb, EPSILON) {
                    let dst = intern((ea.nextstate, eb.nextstate, Filter::Free), &mut out, &mut queue);
                    pending.push((src, Arc::new(ea.ilabel, eb.olabel, k.times(ea.weight, eb.weight), dst)));
                }
            }
            if filter != Filter::BOnly {
                let dst = intern((ea.nextstate, qb, Filter::AOnly), &mut out, &mut queue);
                pending.push((src, Arc::new(ea.ilabel, EPSILON, ea.weight, dst)));
            }
        }
        if filter != Filter::AOnly {
            for eb in b.arcs_with_ilabel(qb, EPSILON) {
                let dst = intern((qa, eb.nextstate, Filter::BOnly), &mut out, &mut queue);
                pending.push((src, Arc::new(EPSILON, eb.olabel, eb.weight, dst)));
            }
        }
        for (s, arc) in pending.drain(..) {
            out.add_arc(s, arc);
        }
    }
    out.arc_sort();
    Ok(out)
}
