use std::collections::HashMap;

use wpctc_core::wordpiece::WordpieceModel;

/// Best score over all `2^(n-1)` ways to split `word`, looking each part
/// up by display name. `None` if no split uses only known pieces.
pub fn best_split(model: &WordpieceModel, word: &str) -> Option<f64> {
    let probs: HashMap<String, f64> = model.pieces().iter().map(|p| (p.name(), p.log_prob)).collect();
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n == 0 {
        return None;
    }
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut score = 0.0;
        let mut start = 0;
        let mut ok = true;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let mut name: String = chars[start..end].iter().collect();
                if start == 0 {
                    name.insert(0, '_');
                }
                match probs.get(&name) {
                    Some(lp) => score += lp,
                    None => {
                        ok = false;
                        break;
                    }
                }
                start = end;
            }
        }
        if ok && best.is_none_or(|b| score > b) {
            best = Some(score);
        }
    }
    best
}
