use wpctc_core::ctc::Posteriorgram;

/// Removes repeats then blanks (unit 0), written independently of the core
/// implementation.
pub fn collapse_reference(path: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    for (i, &u) in path.iter().enumerate() {
        if u == 0 {
            continue;
        }
        if i > 0 && path[i - 1] == u {
            continue;
        }
        out.push(u);
    }
    out
}

/// Calls `f` on every sequence in `0..base` of length `len`.
pub fn for_each_sequence(len: usize, base: u32, mut f: impl FnMut(&[u32])) {
    let mut seq = vec![0u32; len];
    loop {
        f(&seq);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            seq[i] += 1;
            if seq[i] < base {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

/// −log Σ over every frame path that collapses to `target` of the product
/// of its per-frame probabilities. Enumerates all V^T paths.
pub fn ctc_nll_brute_force(post: &Posteriorgram, target: &[u32]) -> f64 {
    let (frames, units) = (post.frames(), post.units());
    let mut terms = Vec::new();
    for_each_sequence(frames, units as u32, |path| {
        if collapse_reference(path) == target {
            terms.push(path.iter().enumerate().map(|(t, &u)| post.get(t, u)).sum::<f64>());
        }
    });
    if terms.is_empty() {
        return f64::INFINITY;
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    -(m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
