pub mod appendix;
pub mod assignment;
pub mod cli;
pub mod data;
pub mod decode;
pub mod error;
pub mod matching_loss;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
