//! Memory-augmented neurosymbolic translator.
//!
//! A command is understood in steps. At each step the [`composer`] picks a
//! recognizable span of the current source expression by bottom-up
//! Tree-LSTM merging, the [`solver`] translates that span into a skeleton
//! over action words and destination variables, the skeleton is resolved
//! against the slot [`memory`](expr::Memory), and the result is written
//! back under a fresh variable that replaces the span. Both policies are
//! trained jointly by REINFORCE ([`trainer`]) over a length curriculum.

pub mod choice;
pub mod composer;
pub mod config;
pub mod eval;
pub mod expr;
pub mod model;
pub mod reward;
pub mod rollout;
pub mod solver;
pub mod trainer;
pub mod vocab;

mod error;

pub use error::ModelError;
pub use model::{Model, ModelConfig};

pub type Result<T> = std::result::Result<T, ModelError>;
