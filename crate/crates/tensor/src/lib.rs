//! Minimal dense-tensor toolkit for the composer/solver models.
//!
//! Everything is 64-bit and single-threaded per [`Tape`]. Learnable arrays
//! live in a [`ParamStore`]; a tape borrows the store read-only, records the
//! forward computation and produces a [`Gradients`] buffer on
//! [`Tape::backward`]. Buffers from several tapes can be summed before one
//! [`AdaDelta::step`].

mod adadelta;
pub mod checkpoint;
pub mod gradcheck;
mod error;
mod params;
mod tape;
mod tensor;

pub use adadelta::AdaDelta;
pub use error::TensorError;
pub use params::{Gradients, Group, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, TensorError>;
