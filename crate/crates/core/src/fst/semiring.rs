//! Weights are stored as negated log values in both supported semirings, so
//! `times` is always addition and only `plus` differs.

use serde::{Deserialize, Serialize};

pub type Weight = f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Semiring {
    /// (min, +): Viterbi / best-path semantics.
    #[default]
    Tropical,
    /// (-log(e^-a + e^-b), +): total probability semantics.
    Log,
}

impl Semiring {
    #[inline]
    pub fn zero(self) -> Weight {
        f64::INFINITY
    }

    #[inline]
    pub fn one(self) -> Weight {
        0.0
    }

    #[inline]
    pub fn is_zero(self, w: Weight) -> bool {
        w == f64::INFINITY
    }

    #[inline]
    pub fn plus(self, a: Weight, b: Weight) -> Weight {
        match self {
            Semiring::Tropical => a.min(b),
            Semiring::Log => {
                if a == f64::INFINITY {
                    return b;
                }
                if b == f64::INFINITY {
                    return a;
                }
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                lo - (-(hi - lo)).exp().ln_1p()
            }
        }
    }

    #[inline]
    pub fn times(self, a: Weight, b: Weight) -> Weight {
        if a == f64::INFINITY || b == f64::INFINITY {
            return f64::INFINITY;
        }
        a + b
    }

    pub fn sum<I: IntoIterator<Item = Weight>>(self, it: I) -> Weight {
        it.into_iter().fold(self.zero(), |acc, w| self.plus(acc, w))
    }
}

/// Numerically stable log(sum(exp(x))) over natural-log values.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Two-argument form of [`log_sum_exp`].
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weight() -> impl Strategy<Value = f64> {
        prop_oneof![Just(f64::INFINITY), -20.0f64..20.0]
    }

    proptest! {
        #[test]
        fn identities_hold(a in weight(), k in prop_oneof![Just(Semiring::Tropical), Just(Semiring::Log)]) {
            prop_assert_eq!(k.times(a, k.one()), a);
            prop_assert_eq!(k.times(k.one(), a), a);
            prop_assert_eq!(k.plus(a, k.zero()), a);
            prop_assert_eq!(k.plus(k.zero(), a), a);
            prop_assert!(k.is_zero(k.times(a, k.zero())));
        }

        #[test]
        fn tropical_plus_idempotent(a in weight()) {
            prop_assert_eq!(Semiring::Tropical.plus(a, a), a);
        }

        #[test]
        fn log_plus_matches_direct_sum(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let direct = -((-a).exp() + (-b).exp()).ln();
            prop_assert!((Semiring::Log.plus(a, b) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
