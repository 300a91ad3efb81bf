//! Record tables, summaries, vocabularies and dataset I/O.

pub mod jsonl;
pub mod lexicon;
pub mod rotowire;
pub mod schema;
pub mod synth;
pub mod tokenize;
pub mod vocab;

pub use jsonl::{load_dataset, save_dataset};
pub use rotowire::{load_rotowire_json, load_rotowire_json_as};
pub use schema::{Dataset, EntityGroups, GameInstance, Record, RecordSchema, NO_VALUE};
pub use synth::{synth_dataset, synth_games, SynthConfig};
pub use tokenize::{tokenize_summary, tokenize_text};
pub use vocab::{build_vocab, Vocabularies, Vocabulary};
