use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::Label;

pub const EPSILON_SYMBOL: &str = "<eps>";

/// Bidirectional string/id map. Id 0 is always `<eps>` and ids are dense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    ids: HashMap<String, Label>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut table = SymbolTable { symbols: Vec::new(), ids: HashMap::new() };
        table.add(EPSILON_SYMBOL);
        table
    }

    /// Returns the id of `symbol`, inserting it if absent.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.ids.insert(symbol.to_string(), id);
        id
    }

    pub fn find(&self, symbol: &str) -> Option<Label> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// Always false: the epsilon entry is permanent.
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.symbols.iter().enumerate().map(|(i, s)| (i as Label, s.as_str()))
    }

    /// Writes `symbol<TAB>id` lines in id order.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, sym) in self.iter() {
            writeln!(w, "{sym}\t{id}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut entries: Vec<(usize, String, Label)> = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(sym), Some(id), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(lineno, format!("expected `symbol<TAB>id`, got {line:?}")));
            };
            let id: Label = id.parse().map_err(|_| Error::parse(lineno, format!("bad symbol id {id:?}")))?;
            entries.push((lineno, sym.to_string(), id));
        }
        entries.sort_by_key(|e| e.2);
        let mut table = SymbolTable { symbols: Vec::new(), ids: HashMap::new() };
        for (lineno, sym, id) in entries {
            if id as usize != table.symbols.len() {
                return Err(Error::parse(lineno, format!("symbol ids must be dense, got {id}")));
            }
            if id == 0 && sym != EPSILON_SYMBOL {
                return Err(Error::parse(lineno, "id 0 must be <eps>"));
            }
            if table.ids.contains_key(&sym) {
                return Err(Error::parse(lineno, format!("duplicate symbol {sym:?}")));
            }
            table.add(&sym);
        }
        if table.symbols.is_empty() {
            table.add(EPSILON_SYMBOL);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epsilon_is_zero() {
        let t = SymbolTable::new();
        assert_eq!(t.find("<eps>"), Some(0));
        assert_eq!(t.symbol(0), Some("<eps>"));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn rejects_sparse_ids() {
        let err = SymbolTable::read_text("<eps>\t0\na\t2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn lookups_roundtrip(words in proptest::collection::vec("[a-z_]{1,6}", 0..20)) {
            let mut t = SymbolTable::new();
            for w in &words {
                let id = t.add(w);
                prop_assert_eq!(t.symbol(id), Some(w.as_str()));
            }
            let mut buf = Vec::new();
            t.write_text(&mut buf).unwrap();
            let back = SymbolTable::read_text(buf.as_slice()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
