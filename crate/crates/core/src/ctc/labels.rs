use crate::error::{Error, Result};

use super::{Unit, BLANK};

/// Frame-level unit sequence; may contain blanks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AlignmentPath(pub Vec<Unit>);

/// Target unit sequence for CTC; never contains blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelSequence(Vec<Unit>);

impl LabelSequence {
    pub fn new(labels: Vec<Unit>) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l == BLANK) {
            return Err(Error::validation(format!("label sequence contains blank at position {pos}")));
        }
        Ok(LabelSequence(labels))
    }

    pub fn as_slice(&self) -> &[Unit] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Unit> {
        self.0
    }

    /// Adjacent equal labels; each one forces an extra blank frame.
    pub fn repeat_count(&self) -> usize {
        self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Fewest frames that can carry this target.
    pub fn min_frames(&self) -> usize {
        self.len() + self.repeat_count()
    }

    pub fn is_feasible(&self, frames: usize) -> bool {
        self.min_frames() <= frames
    }
}

/// The collapse map: merge runs of identical units, then drop blanks.
pub fn collapse(path: &AlignmentPath) -> LabelSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for &u in &path.0 {
        if prev != Some(u) && u != BLANK {
            out.push(u);
        }
        prev = Some(u);
    }
    LabelSequence(out)
}

/// Merges runs of identical units without removing blanks.
pub fn squeeze_repeats(path: &AlignmentPath) -> Vec<Unit> {
    let mut out: Vec<Unit> = Vec::with_capacity(path.0.len());
    for &u in &path.0 {
        if out.last() != Some(&u) {
            out.push(u);
        }
    }
    out
}

/// Moves externally aligned unit ids up by one so that 0 is free for blank.
pub fn shift_labels(alignment: &[u32]) -> AlignmentPath {
    AlignmentPath(alignment.iter().map(|&l| l + 1).collect())
}

/// CTC target for a dense frame alignment: shift, then squeeze repeats.
pub fn target_from_alignment(alignment: &[u32]) -> LabelSequence {
    LabelSequence(squeeze_repeats(&shift_labels(alignment)))
}
