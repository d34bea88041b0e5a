pub mod audio;
pub mod cli;
pub mod coherence;
pub mod dataset;
pub mod dsp;
mod error;
pub mod features;
pub mod losses;
pub mod model;
pub mod service;
pub mod train;

pub use error::{Error, Result};
