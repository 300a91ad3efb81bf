//! The generator: record encoder, entity memory, flat and hierarchical
//! attention, copy-augmented LSTM decoder and search.

pub mod attention;
pub mod config;
pub mod decoder;
pub mod encoder;
pub mod memory;
pub mod network;
pub mod params;
pub mod search;

pub use attention::AttentionOutput;
pub use config::{EncoderMode, MemoryMode, ModelConfig, Variant};
pub use decoder::{CopyTable, DecoderState, TokenDistribution};
pub use encoder::{EncodedTable, TableInput};
pub use network::Model;
pub use params::ModelParams;
pub use search::{beam_search, greedy_decode, Hypothesis, StepModel};
