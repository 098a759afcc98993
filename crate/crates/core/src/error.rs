use thiserror::Error;

/// Errors raised by the key, grid, codec and metrics layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid key: {0}")]
    KeyInvalid(String),

    #[error("image {width}x{height} is too small for a {rows}x{cols} block grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        rows: u8,
        cols: u8,
    },

    #[error("block index {index} out of range (grid has {blocks} blocks)")]
    IndexOutOfRange { index: usize, blocks: usize },

    #[error("frame needs {needed} bits but the grid only has {available} blocks")]
    CapacityExceeded { needed: usize, available: usize },

    #[error("recovered magic 0x{found:02x} (wrong key or not a stego image)")]
    BadMagic { found: u8 },

    #[error("frame declares {declared} payload bytes but only {available} fit in the grid")]
    TruncatedFrame { declared: usize, available: usize },

    #[error("frame header is inconsistent: index {index}, total {total}")]
    InvalidHeader { index: u8, total: u8 },

    #[error("message needs {needed} frames but only {available} covers were given")]
    NotEnoughCovers { needed: usize, available: usize },

    #[error("message needs {needed} frames, more than the 255 a frame header can address")]
    MessageTooLarge { needed: usize },

    #[error("incomplete frame set: have {have} of {total}")]
    MissingFrames { have: usize, total: u8 },

    #[error("conflicting frames: {0}")]
    ConflictingFrames(String),

    #[error("channel {channel} does not exist in a {channels}-channel image")]
    InvalidChannel { channel: usize, channels: usize },

    #[error("invalid raster: {0}")]
    InvalidImage(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,
}

impl Error {
    /// Stable kebab-case identifier used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::KeyInvalid(_) => "key-invalid",
            Error::ImageTooSmall { .. } => "image-too-small",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::CapacityExceeded { .. } => "capacity-exceeded",
            Error::BadMagic { .. } => "bad-magic",
            Error::TruncatedFrame { .. } => "truncated-frame",
            Error::InvalidHeader { .. } => "invalid-header",
            Error::NotEnoughCovers { .. } => "not-enough-covers",
            Error::MessageTooLarge { .. } => "message-too-large",
            Error::MissingFrames { .. } => "missing-frames",
            Error::ConflictingFrames(_) => "conflicting-frames",
            Error::InvalidChannel { .. } => "invalid-channel",
            Error::InvalidImage(_) => "invalid-image",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::EmptyInput => "empty-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
