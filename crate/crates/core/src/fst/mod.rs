//! Semiring-weighted finite-state transducers: representation, composition,
//! trimming, n-best paths and AT&T text I/O.

mod compose;
mod connect;
mod semiring;
mod shortest_path;
mod symbols;
mod text;
mod wfst;

pub use compose::compose;
pub use connect::connect;
pub use semiring::{log_add, log_sum_exp, Semiring, Weight};
pub use shortest_path::{shortest_path, Path};
pub use symbols::{SymbolTable, EPSILON_SYMBOL};
pub use text::{read_text, write_text};
pub use wfst::{Arc, Wfst};

pub type Label = u32;
pub type StateId = u32;

pub const EPSILON: Label = 0;
