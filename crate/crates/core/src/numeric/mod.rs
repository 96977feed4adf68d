//! Dense numeric substrate: matrices, seeded randomness, differentiable
//! kernels, parameter storage, Adam, gradient checking, and checkpoints.
//!
//! Everything is 64-bit and deterministic: every stochastic operation is a
//! pure function of `(seed, stream label, counter)`.

mod checkpoint;
mod dense;
mod gradcheck;
mod matrix;
mod rng;
mod store;
mod tape;

pub use checkpoint::{load_store, save_store, CheckpointError};
pub use dense::{dense_forward_backward, DenseGrads, DenseKind, DensePullback};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use matrix::Matrix;
pub use rng::{sample_bernoulli_matrix, sample_gaussian_matrix, StreamRng};
pub use store::{adam_step, AdamState, OptimError, ParamStore};
pub use tape::{Tape, Var};
