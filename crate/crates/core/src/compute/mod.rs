//! Minimal numerical core.
//!
//! Dense row-major `f64` tensors, a CSR sparse operator, and the handful of
//! differentiable operations the model is built from. Each operation comes as
//! an explicit forward/backward pair; the model composes them in a fixed
//! order instead of recording a tape.

mod adam;
mod gradcheck;
mod ops;
mod sparse;
mod tensor;

pub use adam::{adam_step, AdamConfig, GradSlot};
pub use gradcheck::{grad_check, GradCheckConfig};
pub use ops::{
    activation, activation_backward, matmul, matmul_backward, matmul_into, readout_pool,
    readout_pool_backward, row_softmax, row_softmax_backward, Activation, PoolCache, ReadoutMode,
    Transpose,
};
pub use sparse::SparseOp;
pub use tensor::Tensor;
