//! Utterance-level emotion recognition for code-mixed dialogues.
//!
//! Two routes are covered: fine-tuning a pretrained encoder with a small
//! classifier head in two stages, and prompting a causal language model
//! zero- or few-shot. [`pipeline`] wires both into reproducible runs.

pub mod api;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod pipeline;
pub mod promptlab;
pub mod textprep;
pub mod training;

pub use error::{Error, ErrorKind, Result};
