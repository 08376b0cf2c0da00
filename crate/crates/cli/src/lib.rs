//! Pipeline plumbing behind the `wpctc` command.

pub mod artifacts;
pub mod bench;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use error::{exit_code, CliError};
pub use manifest::{PipelineManifest, ResolvedManifest};
pub use report::Report;
