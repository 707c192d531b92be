//! Composite neural language models: a variational topic model supplies
//! latent and explainable topic context to an LSTM language model.

pub mod bench;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod nlm;
pub mod ntm;
pub mod numcore;
mod parallel;
pub mod synth;
pub mod topics;
pub mod trainer;

pub use error::{Error, Result};
pub use parallel::THREADS_ENV;
