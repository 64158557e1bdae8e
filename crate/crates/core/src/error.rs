use thiserror::Error;

/// Errors surfaced by the codec library.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or band layout violates a block's input contract.
    #[error("shape contract violation: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bitstream: {0}")]
    Bitstream(#[from] crate::codec::BitstreamError),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("model is not finalized; call finalize() before coding")]
    NotFinalized,

    #[error("image {width}x{height} exceeds the configured maximum of {max} pixels per side")]
    ImageTooLarge { width: u32, height: u32, max: u32 },

    #[error("non-finite {term} in loss")]
    NonFinite { term: String },

    #[error("image: {0}")]
    Image(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
