use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Array lengths or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A NaN or infinity appeared while evaluating a network.
    #[error("non-finite value in layer {layer}: {what}")]
    Numeric { layer: usize, what: String },

    /// Training produced a non-finite loss; carries the state at failure.
    #[error("training diverged at epoch {epoch}, batch {batch}: {snapshot}")]
    Diverged { epoch: usize, batch: usize, snapshot: String },

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed IDX payload.
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
