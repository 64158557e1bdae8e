//! Learned screen-content image codec built on a three-band (high / mid /
//! low frequency) feature decomposition.
//!
//! The crate carries its own small autodiff engine ([`tensor`]), the network
//! blocks ([`freq_blocks`], [`fusion`], [`context`], [`adaptive_quant`],
//! [`entropy`]), the assembled model ([`model`]), a range-coded bitstream
//! ([`codec`]), training ([`training`]) and evaluation ([`eval`]) tooling.
//! [`gradcheck`] compares tape gradients against central differences.

pub mod adaptive_quant;
pub mod codec;
pub mod context;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod freq;
pub mod freq_blocks;
pub mod fusion;
pub mod gradcheck;
pub mod image_io;
pub mod model;
pub mod nn;
pub mod params;
pub mod tensor;
pub mod training;
pub use error::{Error, Result};
