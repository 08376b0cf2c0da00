//! AT&T-style text serialization.
//!
//! Arc lines are `src dst ilabel olabel [weight]`, final-state lines are
//! `state [weight]`. The first line's source state is the start state and
//! an omitted weight means semiring one. Labels are numeric ids unless a
//! symbol table is supplied, in which case symbols are accepted as well.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::semiring::Semiring;
use super::symbols::SymbolTable;
use super::wfst::{Arc, Wfst};
use super::{Label, StateId};

pub fn write_text<W: Write>(g: &Wfst, mut w: W) -> Result<()> {
    let Some(start) = g.start() else {
        return Ok(());
    };
    let order = std::iter::once(start).chain(g.states().filter(|&s| s != start));
    for s in order {
        for a in g.arcs(s) {
            if a.weight == g.semiring().one() {
                writeln!(w, "{}\t{}\t{}\t{}", s, a.nextstate, a.ilabel, a.olabel)?;
            } else {
                writeln!(w, "{}\t{}\t{}\t{}\t{}", s, a.nextstate, a.ilabel, a.olabel, a.weight)?;
            }
        }
        if g.is_final(s) {
            let fw = g.final_weight(s);
            if fw == g.semiring().one() {
                writeln!(w, "{s}")?;
            } else {
                writeln!(w, "{s}\t{fw}")?;
            }
        }
    }
    Ok(())
}

pub fn read_text<R: BufRead>(
    r: R,
    semiring: Semiring,
    isymbols: Option<&SymbolTable>,
    osymbols: Option<&SymbolTable>,
) -> Result<Wfst> {
    enum Line {
        Arc(StateId, Arc),
        Final(StateId, f64),
    }
    let mut lines = Vec::new();
    let mut max_state: Option<StateId> = None;
    let mut start: Option<StateId> = None;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let state =
            |f: &str| -> Result<StateId> { f.parse().map_err(|_| Error::parse(lineno, format!("bad state id {f:?}"))) };
        let weight =
            |f: &str| -> Result<f64> { f.parse().map_err(|_| Error::parse(lineno, format!("bad weight {f:?}"))) };
        let parsed = match fields.len() {
            1 | 2 => {
                let s = state(fields[0])?;
                let w = fields.get(1).map(|f| weight(f)).transpose()?.unwrap_or(semiring.one());
                Line::Final(s, w)
            }
            4 | 5 => {
                let s = state(fields[0])?;
                let d = state(fields[1])?;
                let il = label(fields[2], isymbols, lineno)?;
                let ol = label(fields[3], osymbols, lineno)?;
                let w = fields.get(4).map(|f| weight(f)).transpose()?.unwrap_or(semiring.one());
                max_state = max_state.max(Some(d));
                Line::Arc(s, Arc::new(il, ol, w, d))
            }
            n => return Err(Error::parse(lineno, format!("expected 1, 2, 4 or 5 fields, got {n}"))),
        };
        let src = match &parsed {
            Line::Arc(s, _) | Line::Final(s, _) => *s,
        };
        start.get_or_insert(src);
        max_state = max_state.max(Some(src));
        lines.push(parsed);
    }

    let mut g = Wfst::new(semiring);
    if let Some(m) = max_state {
        g.add_states(m as usize + 1);
    }
    if let Some(s) = start {
        g.set_start(s);
    }
    for line in lines {
        match line {
            Line::Arc(s, a) => g.add_arc(s, a),
            Line::Final(s, w) => g.set_final(s, w),
        }
    }
    g.arc_sort();
    g.set_isymbols(isymbols.cloned());
    g.set_osymbols(osymbols.cloned());
    Ok(g)
}

fn label(field: &str, table: Option<&SymbolTable>, lineno: usize) -> Result<Label> {
    if let Some(t) = table {
        if let Some(id) = t.find(field) {
            return Ok(id);
        }
    }
    let id: Label = field.parse().map_err(|_| Error::parse(lineno, format!("unknown label {field:?}")))?;
    if let Some(t) = table {
        if id as usize >= t.len() {
            return Err(Error::parse(lineno, format!("label id {id} outside symbol table")));
        }
    }
    Ok(id)
}
