//! Orchestration behind the `advbound` binary: data preparation, training,
//! certification, oracle verification and report merging.

pub mod certify;
pub mod config;
pub mod manifest;
pub mod prepare;
pub mod report;
pub mod train;
pub mod verify;

pub use certify::{cmd_certify, CertifyOptions, CertifyOutput};
pub use config::RunConfig;
pub use manifest::RunManifest;
pub use prepare::cmd_prepare_data;
pub use report::cmd_report;
pub use train::cmd_train;
pub use verify::{cmd_verify, VerifyLedger};

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<advbound::Error> for CliError {
    fn from(e: advbound::Error) -> Self {
        use advbound::Error as E;
        let msg = e.to_string();
        match e {
            E::Numeric { .. } | E::Diverged { .. } => CliError::Numeric(msg),
            E::Contract(_) => CliError::Config(msg),
            E::Shape(_) => CliError::Invariant(msg),
            E::Parse { .. } | E::Checkpoint(_) | E::Io(_) | E::Json(_) => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Lowercase hex of a byte string.
pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
