//! Range coder, container layout and image encode/decode.

mod container;
mod pipeline;
mod range_coder;

pub use container::{
    BitstreamError, Container, Header, FLAG_CRC, HEADER_LEN, MAGIC, NUM_STREAMS, STREAM_NAMES, VERSION,
};
pub use range_coder::{RangeDecoder, RangeEncoder};

pub use pipeline::{
    bits_per_pixel, check_header, decode_container, decode_image, decode_latents, encode_image, latent_shapes, DecodedLatents,
    Encoded,
};
