//! Generative argumentative component detection: corpora, inline tag codec,
//! prompting, batched inference, alignment-based label projection and
//! token-level evaluation.

pub mod align;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod inference;
pub mod pipeline;
pub mod prompting;
pub mod reference;
pub mod synth;
pub mod tagcodec;

pub use error::{Error, Result};
