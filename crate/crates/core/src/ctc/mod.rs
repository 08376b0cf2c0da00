//! CTC machinery: posteriorgrams, the collapse map, label shifting for
//! alignment-derived targets and the forward-backward loss.

mod labels;
mod loss;
mod posteriorgram;

pub use labels::{collapse, shift_labels, squeeze_repeats, target_from_alignment, AlignmentPath, LabelSequence};
pub use loss::{ctc_loss, CtcOutput};
#[allow(unused_imports)]
pub(crate) use posteriorgram::{read_matrix, write_matrix};
pub use posteriorgram::{Posteriorgram, ROW_NORM_TOLERANCE};

/// Index of an acoustic modeling unit (column of a posteriorgram).
pub type Unit = u32;

/// The blank unit is always column 0.
pub const BLANK: Unit = 0;
