use std::io;

use thiserror::Error;

/// Errors raised by the command layer itself, as opposed to the library.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Process exit code for an error chain: 2 for bad options or manifests,
/// 3 for unreadable or inconsistent data, 4 for anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Config(_) => EXIT_CONFIG,
                CliError::Data(_) => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<wpctc_core::Error>() {
            return match e {
                wpctc_core::Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<toml::de::Error>() || cause.is::<clap::Error>() {
            return EXIT_CONFIG;
        }
        if cause.is::<io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn classifies_through_context() {
        let e = Err::<(), _>(CliError::Config("x".into())).context("stage run").unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let e = Err::<(), _>(io::Error::other("gone")).context("reading").unwrap_err();
        assert_eq!(exit_code(&e), EXIT_DATA);
        assert_eq!(exit_code(&anyhow::anyhow!("bug")), EXIT_INTERNAL);
    }
}
