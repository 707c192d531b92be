//! Dense tensors, a reverse-mode autodiff tape and seeded randomness.

mod graph;
mod rng;
mod tensor;

pub use graph::{Binary, Graph, Unary, Var};
pub use rng::{gaussian_sample, RngState, SeededRng};
pub use tensor::{argmax, log_softmax, log_sum_exp, sigmoid, softmax, softplus, Tensor};
