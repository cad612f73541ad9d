//! Dense `f64` tensors, tape-based reverse-mode differentiation and the
//! AdamW optimizer.

pub mod checkpoint;
pub mod optim;
mod params;
mod tape;
mod tensor;

pub use optim::{adamw_step, AdamWConfig, OptimizerState, StepStats};
pub use params::{Bound, ParamGroup, ParamId, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
