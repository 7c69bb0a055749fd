//! Co-channel RF signal separation with a WaveNet-style network whose
//! dilation rates are learnable, plus the synthesis, training and
//! evaluation chain around it.

pub mod autodiff;
mod binfmt;
pub mod datagen;
pub mod dsp;
mod error;
pub mod eval;
pub mod rng;
pub mod train;
pub mod wavenet;

pub use binfmt::FormatError;
pub use error::{Error, Result};
