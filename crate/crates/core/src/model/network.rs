use std::path::Path;

use super::attention::AttentionOutput;
use super::config::ModelConfig;
use super::decoder::{decode_step, DecoderState, StepResult};
use super::encoder::{encode, EncodedTable, TableInput};
use super::params::ModelParams;
use super::search::{beam_search, greedy_decode, StepModel};
use crate::data::vocab::{Vocabulary, BOS, EOS, PAD};
use crate::data::{GameInstance, Vocabularies};
use crate::error::{Error, Result};
use crate::numerics::{checkpoint, ParamStore};

pub const CONFIG_FILE: &str = "model.json";
pub const PARAMS_FILE: &str = "params.ckpt";
pub const WORDS_FILE: &str = "vocab.words.tsv";

/// A model variant: configuration, vocabularies and parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: Vocabularies,
    pub store: ParamStore,
    pub params: ModelParams,
    generation_mask: Vec<bool>,
}

impl Model {
    pub fn new(config: ModelConfig, vocabs: Vocabularies) -> Result<Self> {
        let mut store = ParamStore::new();
        let params = ModelParams::register(&mut store, &config, &vocabs)?;
        Ok(Self::assemble(config, vocabs, store, params))
    }

    /// Wraps an existing parameter store, checking it matches the config.
    pub fn from_store(
        config: ModelConfig,
        vocabs: Vocabularies,
        store: ParamStore,
    ) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::lookup(&store, &config, &vocabs)?;
        Ok(Self::assemble(config, vocabs, store, params))
    }

    fn assemble(
        config: ModelConfig,
        vocabs: Vocabularies,
        store: ParamStore,
        params: ModelParams,
    ) -> Self {
        // padding and the begin token are never generated
        let generation_mask = (0..vocabs.words.len())
            .map(|i| i != PAD && i != BOS)
            .collect();
        Model {
            config,
            vocabs,
            store,
            params,
            generation_mask,
        }
    }

    pub fn generation_mask(&self) -> &[bool] {
        &self.generation_mask
    }

    pub fn words(&self) -> &Vocabulary {
        &self.vocabs.words
    }

    pub fn prepare(&self, game: &GameInstance) -> Result<TableInput> {
        TableInput::new(game, &self.vocabs)
    }

    pub fn encode(&self, input: &TableInput) -> Result<EncodedTable> {
        encode(&self.store, &self.params, &self.config, input)
    }

    pub fn initial_state(&self, table: &EncodedTable) -> DecoderState {
        DecoderState::initial(self, table)
    }

    pub fn decode_step(
        &self,
        table: &EncodedTable,
        state: &DecoderState,
        prev: usize,
    ) -> Result<StepResult> {
        decode_step(self, table, state, prev)
    }

    /// Output ids of a summary, end token appended.
    pub fn target_ids(&self, input: &TableInput, summary: &[String]) -> Vec<usize> {
        summary
            .iter()
            .map(|t| input.copy.target_id(t, &self.vocabs.words))
            .chain(std::iter::once(EOS))
            .collect()
    }

    /// Tokens for output ids, stopping before the end token.
    pub fn detokenize(&self, input: &TableInput, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .map(|&id| input.copy.token(id, &self.vocabs.words).to_string())
            .collect()
    }

    pub fn session<'m>(&'m self, table: &'m EncodedTable) -> DecoderSession<'m> {
        DecoderSession { model: self, table }
    }

    /// Beam search (greedy when `beam == 1`); returns output tokens.
    pub fn generate(
        &self,
        game: &GameInstance,
        beam: usize,
        max_len: usize,
    ) -> Result<Vec<String>> {
        let input = self.prepare(game)?;
        let table = self.encode(&input)?;
        let session = self.session(&table);
        let ids = if beam == 1 {
            greedy_decode(&session, max_len)?
        } else {
            beam_search(&session, beam, max_len)?.tokens
        };
        Ok(self.detokenize(&input, &ids))
    }

    /// Re-runs the decoder along `ids` and returns the attention of each step.
    pub fn attention_trace(
        &self,
        table: &EncodedTable,
        ids: &[usize],
    ) -> Result<Vec<AttentionOutput>> {
        let mut state = self.initial_state(table);
        let mut prev = BOS;
        let mut out = Vec::with_capacity(ids.len());
        for &y in ids {
            let step = self.decode_step(table, &state, prev)?;
            out.push(step.attention);
            state = step.state;
            prev = y;
        }
        Ok(out)
    }

    /// Writes config, vocabularies and parameters into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(CONFIG_FILE),
            serde_json::to_string_pretty(&self.config)? + "\n",
        )?;
        self.vocabs.words.save(&dir.join(WORDS_FILE))?;
        for (role, v) in self.vocabs.features.iter().enumerate() {
            v.save(&dir.join(format!("vocab.feature{role}.tsv")))?;
        }
        checkpoint::save(&self.store, &dir.join(PARAMS_FILE))
    }

    /// Loads a model saved with [`Model::save`]; `params` overrides the
    /// parameter file (e.g. a per-epoch checkpoint).
    pub fn load(dir: &Path, params: Option<&Path>) -> Result<Self> {
        let config: ModelConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        let words = Vocabulary::load(&dir.join(WORDS_FILE))?;
        let features = (0..config.num_features)
            .map(|role| Vocabulary::load(&dir.join(format!("vocab.feature{role}.tsv"))))
            .collect::<Result<_>>()?;
        let store = checkpoint::load(params.unwrap_or(&dir.join(PARAMS_FILE)))?;
        Self::from_store(config, Vocabularies { words, features }, store)
    }
}

/// Decoding over one encoded table.
pub struct DecoderSession<'m> {
    model: &'m Model,
    table: &'m EncodedTable,
}

impl StepModel for DecoderSession<'_> {
    type State = DecoderState;

    fn start(&self) -> Result<DecoderState> {
        Ok(self.model.initial_state(self.table))
    }

    fn start_token(&self) -> usize {
        BOS
    }

    fn end_token(&self) -> usize {
        EOS
    }

    fn next(&self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState)> {
        let step = self.model.decode_step(self.table, state, prev)?;
        if step.distribution.mixed.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite output distribution".into()));
        }
        Ok((step.distribution.mixed, step.state))
    }
}
