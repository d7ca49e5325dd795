//! Polar codes with non-systematic and systematic encoding, successive
//! cancellation (SC) and SC-then-re-encode (SC-EN) decoding, a composite
//! error model for the systematic gain, and a Monte Carlo BER harness.

pub mod cli;
pub mod codec;
pub mod construction;
pub mod error;
pub mod error_model;
pub mod gf2;
pub mod sim;

pub use construction::{ChannelDesign, Design, PolarCode};
pub use error::{PolarError, Result};
pub use gf2::{BitWord, GeneratorSpec};
