//! Entity-centric data-to-text generation.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense matrices, a reverse-mode tape, LSTM cells, gradient checks.
//! * [`data`]: record schema, dataset ingestion, vocabularies, synthetic games.
//! * [`model`]: record encoder, entity memory, flat and hierarchical attention,
//!   the copy-augmented decoder and beam search.
//! * [`training`]: likelihood objective, Adagrad, truncated BPTT.
//! * [`eval`]: relation matcher, RG/CS/CO/BLEU and the ablation harness.
//! * [`template`]: the rule-based baseline generator.

pub mod data;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod model;
pub mod numerics;
pub mod template;
pub mod training;

pub use error::{Error, Result};
