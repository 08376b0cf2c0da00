use crate::error::{Error, Result};
use crate::fst::log_add;

use super::labels::LabelSequence;
use super::posteriorgram::Posteriorgram;
use super::BLANK;

#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutput {
    /// −log p(target | frames); +∞ when infeasible.
    pub loss: f64,
    /// ∂loss/∂(log-prob) in the posteriorgram's row-major layout. All zero
    /// when infeasible.
    pub grad: Vec<f64>,
    pub feasible: bool,
}

/// CTC negative log-likelihood and its gradient with respect to every
/// input log-probability, by forward-backward over the blank-augmented
/// target lattice (blank, y1, blank, y2, ..., yL, blank).
///
/// Rows need not be normalized: each entry is treated as an independent
/// log-score, which is what finite-difference checks perturb.
pub fn ctc_loss(post: &Posteriorgram, target: &LabelSequence) -> Result<CtcOutput> {
    let (frames, units) = (post.frames(), post.units());
    if let Some(&bad) = target.as_slice().iter().find(|&&l| l as usize >= units) {
        return Err(Error::config(format!("target unit {bad} outside {units}-unit posteriorgram")));
    }
    if !target.is_feasible(frames) {
        return Ok(CtcOutput { loss: f64::INFINITY, grad: vec![0.0; frames * units], feasible: false });
    }
    if frames == 0 {
        // only the empty target is feasible here
        return Ok(CtcOutput { loss: 0.0, grad: Vec::new(), feasible: true });
    }

    let ext: Vec<u32> = std::iter::once(BLANK).chain(target.as_slice().iter().flat_map(|&l| [l, BLANK])).collect();
    let states = ext.len();
    let skip_ok = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let neg = f64::NEG_INFINITY;

    // alpha includes the emission at t; beta excludes it.
    let mut alpha = vec![neg; frames * states];
    alpha[0] = post.get(0, ext[0]);
    if states > 1 {
        alpha[1] = post.get(0, ext[1]);
    }
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * states);
        let prev = &prev[(t - 1) * states..];
        for s in 0..states {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if skip_ok(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == neg { neg } else { acc + post.get(t, ext[s]) };
        }
    }

    let mut beta = vec![neg; frames * states];
    let last = (frames - 1) * states;
    beta[last + states - 1] = 0.0;
    if states > 1 {
        beta[last + states - 2] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * states);
        let cur = &mut cur[t * states..];
        let next = &next[..states];
        for s in 0..states {
            let mut acc = neg;
            for s2 in [s, s + 1, s + 2] {
                if s2 >= states || (s2 == s + 2 && !skip_ok(s2)) {
                    continue;
                }
                if next[s2] != neg {
                    acc = log_add(acc, next[s2] + post.get(t + 1, ext[s2]));
                }
            }
            cur[s] = acc;
        }
    }

    let mut log_like = alpha[last + states - 1];
    if states > 1 {
        log_like = log_add(log_like, alpha[last + states - 2]);
    }
    if log_like == neg {
        // feasible length-wise but every path has zero probability
        return Ok(CtcOutput { loss: f64::INFINITY, grad: vec![0.0; frames * units], feasible: true });
    }

    let mut grad = vec![0.0; frames * units];
    let mut occupancy = vec![neg; units];
    for t in 0..frames {
        occupancy.fill(neg);
        for s in 0..states {
            let v = alpha[t * states + s] + beta[t * states + s];
            if v != neg {
                let k = ext[s] as usize;
                occupancy[k] = log_add(occupancy[k], v);
            }
        }
        for k in 0..units {
            if occupancy[k] != neg {
                grad[t * units + k] = -(occupancy[k] - log_like).exp();
            }
        }
    }
    Ok(CtcOutput { loss: -log_like, grad, feasible: true })
}
