//! Tactile images augmented with dense optical flow.

pub mod augment;
pub mod classifier;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod image;
pub mod oracle;
pub mod pnm;
pub mod raster;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
