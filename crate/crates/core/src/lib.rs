//! Beam-alignment training for millimeter-wave links.

pub mod array;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod experiment;
pub mod ldp;
pub mod rng;
pub mod specfun;
pub mod training;

pub use error::{Error, Result};
