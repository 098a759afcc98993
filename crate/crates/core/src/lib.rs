//! Keyed block-LSB steganography.
//!
//! A 32-bit [`StegoKey`] splits an image into an R×C grid of blocks. Each
//! block carries one message bit, written into pattern-selected low
//! bit-planes of every pixel and recovered by majority vote. Long messages
//! span several images. The [`transport`] module moves stego images to a
//! display endpoint over TCP and [`cli`] wires everything into a binary.

pub mod cli;
pub mod codec;
pub mod error;
pub mod grid;
pub mod imageio;
pub mod key;
pub mod metrics;
pub mod transport;

#[cfg(test)]
mod testing;

pub use codec::{
    embed_frame, embed_message, extract_frame, extract_message, Codec, MessageFrame, RasterImage,
};
pub use error::{Error, Result};
pub use grid::{block_pixels, make_grid, BlockGrid};
pub use key::{generate_key, parse_key, serialize_key, Pattern, StegoKey};
pub use metrics::{bit_error_rate, compare, frame_capacity, Psnr, QualityReport};
