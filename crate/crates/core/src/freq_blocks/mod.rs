//! Frequency-decomposition convolution blocks.
//!
//! [`MoConv`] and [`Mtorb`] work on three bands (high / mid / low at
//! 1 : 1/2 : 1/4 resolution). [`OctConv`], [`GoConv`] and [`Torb`] are the
//! two-band baselines kept for ablation.

mod multi;
mod octave;
mod resample;

pub use multi::{CrossTerm, MoConv, Mtorb};
pub use octave::{GoConv, OctConv, Torb, TwoBand};
pub use resample::{resample_geom, Resampler};
