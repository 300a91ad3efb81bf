use super::config::{EncoderMode, MemoryMode, ModelConfig};
use crate::data::{RecordSchema, Vocabularies};
use crate::error::{Error, Result};
use crate::numerics::{LstmWeights, ParamId, ParamStore};

#[derive(Clone, Debug)]
pub struct SequentialEncoderParams {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
    /// Projects `[forward; backward]` states to an encoder output.
    pub output: ParamId,
    pub init_hidden: ParamId,
    pub init_cell: ParamId,
}

#[derive(Clone, Debug)]
pub struct MemoryParams {
    /// Maps entity aggregates to initial memories.
    pub init: ParamId,
    /// Bilinear entity attention score between decoder state and memory.
    pub entity_score: ParamId,
    pub update_gate: Option<(ParamId, ParamId)>,
    pub change_hidden: Option<(ParamId, ParamId)>,
    pub change_memory: Option<(ParamId, ParamId)>,
    pub candidate: Option<ParamId>,
}

/// Handles to every trainable matrix of one model variant.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub feature_embeddings: Vec<ParamId>,
    pub record_weight: ParamId,
    pub record_bias: ParamId,
    pub sequential: Option<SequentialEncoderParams>,
    pub word_embedding: ParamId,
    pub decoder_layers: Vec<LstmWeights>,
    pub attention_score: ParamId,
    pub attention_combine: ParamId,
    pub output_weight: ParamId,
    pub output_bias: ParamId,
    pub copy_weight: ParamId,
    pub copy_bias: ParamId,
    pub memory: Option<MemoryParams>,
}

/// Shapes each variant registers, by parameter name.
pub fn expected_shapes(config: &ModelConfig, vocabs: &Vocabularies) -> Vec<(String, usize, usize)> {
    let (n, p, m) = (config.hidden, config.memory, config.feature_embed);
    let l = config.num_features;
    let schema = RecordSchema::from_features(l).unwrap_or(RecordSchema::Rw4);
    let mut out = Vec::new();
    for (role, vocab) in schema.role_names().iter().zip(&vocabs.features) {
        out.push((format!("embed.{role}"), vocab.len(), m));
    }
    out.push(("record.weight".into(), n, m * l));
    out.push(("record.bias".into(), n, 1));
    let lstm =
        |out: &mut Vec<(String, usize, usize)>, prefix: &str, input: usize, hidden: usize| {
            out.push((format!("{prefix}.w_input"), 4 * hidden, input));
            out.push((format!("{prefix}.w_hidden"), 4 * hidden, hidden));
            out.push((format!("{prefix}.bias"), 4 * hidden, 1));
        };
    if config.encoder == EncoderMode::Sequential {
        lstm(&mut out, "encoder.forward", n, n / 2);
        lstm(&mut out, "encoder.backward", n, n / 2);
        out.push(("encoder.output".into(), n, n));
        out.push(("encoder.init_hidden".into(), n, n));
        out.push(("encoder.init_cell".into(), n, n));
    }
    out.push((
        "decoder.embed".into(),
        vocabs.words.len(),
        config.word_embed,
    ));
    for layer in 0..config.layers {
        let input = if layer == 0 { config.word_embed + n } else { n };
        lstm(&mut out, &format!("decoder.layer{layer}"), input, n);
    }
    out.push(("attention.score".into(), n, n));
    out.push(("attention.combine".into(), n, 2 * n));
    out.push(("output.weight".into(), vocabs.words.len(), n));
    out.push(("output.bias".into(), vocabs.words.len(), 1));
    out.push(("copy.weight".into(), 1, n));
    out.push(("copy.bias".into(), 1, 1));
    if let Some(mode) = config.variant.memory_mode() {
        out.push(("memory.init".into(), p, n));
        out.push(("memory.entity_score".into(), n, p));
        if mode == MemoryMode::Gated {
            out.push(("memory.update_gate".into(), p, n));
            out.push(("memory.update_gate_bias".into(), p, 1));
        }
        if mode != MemoryMode::Static {
            out.push(("memory.change_hidden".into(), p, n));
            out.push(("memory.change_hidden_bias".into(), p, 1));
            out.push(("memory.change_memory".into(), p, p));
            out.push(("memory.change_memory_bias".into(), p, 1));
            out.push(("memory.candidate".into(), p, n));
        }
    }
    out
}

impl ModelParams {
    /// Registers fresh uniformly initialised parameters.
    pub fn register(
        store: &mut ParamStore,
        config: &ModelConfig,
        vocabs: &Vocabularies,
    ) -> Result<Self> {
        config.validate()?;
        if vocabs.features.len() != config.num_features {
            return Err(Error::Usage(format!(
                "{} feature vocabularies for {} features",
                vocabs.features.len(),
                config.num_features
            )));
        }
        for (name, rows, cols) in expected_shapes(config, vocabs) {
            store.add_uniform(&name, rows, cols, config.seed)?;
        }
        Self::lookup(store, config, vocabs)
    }

    /// Resolves handles in a store that already holds the parameters,
    /// checking every shape.
    pub fn lookup(store: &ParamStore, config: &ModelConfig, vocabs: &Vocabularies) -> Result<Self> {
        let shapes = expected_shapes(config, vocabs);
        for (name, rows, cols) in &shapes {
            let id = store.require(name)?;
            if store.value(id).shape() != (*rows, *cols) {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, expected {:?}",
                    store.value(id).shape(),
                    (rows, cols)
                )));
            }
        }
        if store.len() != shapes.len() {
            return Err(Error::Checkpoint(format!(
                "store holds {} parameters, variant {} uses {}",
                store.len(),
                config.variant,
                shapes.len()
            )));
        }
        let id = |name: &str| store.require(name);
        let opt_pair = |a: &str, b: &str| -> Result<Option<(ParamId, ParamId)>> {
            match (store.id(a), store.id(b)) {
                (Some(x), Some(y)) => Ok(Some((x, y))),
                _ => Ok(None),
            }
        };
        let schema = RecordSchema::from_features(config.num_features)?;
        let sequential = if config.encoder == EncoderMode::Sequential {
            Some(SequentialEncoderParams {
                forward: LstmWeights::lookup(store, "encoder.forward")?,
                backward: LstmWeights::lookup(store, "encoder.backward")?,
                output: id("encoder.output")?,
                init_hidden: id("encoder.init_hidden")?,
                init_cell: id("encoder.init_cell")?,
            })
        } else {
            None
        };
        let memory = match config.variant.memory_mode() {
            None => None,
            Some(_) => Some(MemoryParams {
                init: id("memory.init")?,
                entity_score: id("memory.entity_score")?,
                update_gate: opt_pair("memory.update_gate", "memory.update_gate_bias")?,
                change_hidden: opt_pair("memory.change_hidden", "memory.change_hidden_bias")?,
                change_memory: opt_pair("memory.change_memory", "memory.change_memory_bias")?,
                candidate: store.id("memory.candidate"),
            }),
        };
        Ok(ModelParams {
            feature_embeddings: schema
                .role_names()
                .iter()
                .map(|role| id(&format!("embed.{role}")))
                .collect::<Result<_>>()?,
            record_weight: id("record.weight")?,
            record_bias: id("record.bias")?,
            sequential,
            word_embedding: id("decoder.embed")?,
            decoder_layers: (0..config.layers)
                .map(|l| LstmWeights::lookup(store, &format!("decoder.layer{l}")))
                .collect::<Result<_>>()?,
            attention_score: id("attention.score")?,
            attention_combine: id("attention.combine")?,
            output_weight: id("output.weight")?,
            output_bias: id("output.bias")?,
            copy_weight: id("copy.weight")?,
            copy_bias: id("copy.bias")?,
            memory,
        })
    }
}
