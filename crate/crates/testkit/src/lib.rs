//! Brute-force reference implementations. Everything here works by
//! exhaustive enumeration over the public data of the core types and never
//! calls the algorithm it is used to check.

pub mod ctc;
pub mod decoder;
pub mod fst;
pub mod lm;
pub mod wordpiece;

use rand::rngs::StdRng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Largest relative error `|a-b| / max(|a|, |b|, floor)` over paired values.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}
