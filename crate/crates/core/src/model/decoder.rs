//! LSTM decoder with input feeding, the generation distribution and the
//! conditional copy switch.

use super::attention::{
    flat_attention_on_tape, hierarchical_attention_on_tape, AttentionOutput, AttentionVars,
};
use super::config::MemoryMode;
use super::encoder::{EncodedTable, TableInput};
use super::memory::{memory_step_on_tape, MemoryUpdate};
use super::network::Model;
use crate::data::vocab::{Vocabulary, BOS, PAD, UNK};
use crate::data::NO_VALUE;
use crate::error::{Error, Result};
use crate::numerics::{lstm_step, Matrix, Tape, Var};

/// Maps record values to output ids. Values missing from the word vocabulary
/// get extended ids `V, V+1, ...` so they can still be copied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CopyTable {
    pub vocab_size: usize,
    /// Output id of each record's value, `None` if the value is not copyable.
    pub record_target: Vec<Option<usize>>,
    pub extra_tokens: Vec<String>,
    /// Records with a copyable value.
    pub eligible: Vec<usize>,
}

/// A value can be copied as one output token: not the `-1` sentinel, no spaces.
pub fn copy_eligible(value: &str) -> bool {
    !value.is_empty() && value != NO_VALUE && !value.contains(char::is_whitespace)
}

impl CopyTable {
    pub fn new(values: &[String], words: &Vocabulary) -> Self {
        let vocab_size = words.len();
        let mut extra_tokens: Vec<String> = Vec::new();
        let mut record_target = Vec::with_capacity(values.len());
        let mut eligible = Vec::new();
        for (j, v) in values.iter().enumerate() {
            if !copy_eligible(v) {
                record_target.push(None);
                continue;
            }
            eligible.push(j);
            let id = match words.get(v).filter(|&id| id != PAD && id != BOS) {
                Some(id) => id,
                None => match extra_tokens.iter().position(|t| t == v) {
                    Some(i) => vocab_size + i,
                    None => {
                        extra_tokens.push(v.clone());
                        vocab_size + extra_tokens.len() - 1
                    }
                },
            };
            record_target.push(Some(id));
        }
        CopyTable {
            vocab_size,
            record_target,
            extra_tokens,
            eligible,
        }
    }

    /// Size of the output space: vocabulary plus table-only values.
    pub fn extended_size(&self) -> usize {
        self.vocab_size + self.extra_tokens.len()
    }

    pub fn records_for(&self, id: usize) -> Vec<usize> {
        self.record_target
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == Some(id))
            .map(|(j, _)| j)
            .collect()
    }

    /// Output id of a summary token.
    pub fn target_id(&self, token: &str, words: &Vocabulary) -> usize {
        match words.get(token) {
            Some(PAD) | Some(BOS) => UNK,
            Some(id) => id,
            None => self
                .extra_tokens
                .iter()
                .position(|t| t == token)
                .map_or(UNK, |i| self.vocab_size + i),
        }
    }

    pub fn token<'a>(&'a self, id: usize, words: &'a Vocabulary) -> &'a str {
        if id < self.vocab_size {
            words.token(id)
        } else {
            self.extra_tokens
                .get(id - self.vocab_size)
                .map_or("<unk>", String::as_str)
        }
    }
}

/// Decoder state carried between steps, as tape variables.
#[derive(Clone, Debug)]
pub struct StateVars {
    pub hidden: Vec<Var>,
    pub cell: Vec<Var>,
    /// Previous attention vector, fed back as input.
    pub attention: Var,
    pub memory: Option<Var>,
}

/// Per-table quantities shared by every step on a tape.
#[derive(Clone, Copy, Debug)]
pub struct EncoderContext {
    pub outputs: Var,
    pub keys: Var,
    pub initial_memory: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct StepVars {
    pub state: StateVars,
    /// Top-layer decoder output `d_t`.
    pub top: Var,
    pub attention: AttentionVars,
    pub memory_update: Option<MemoryUpdate>,
    /// Generation distribution over the word vocabulary (`V x 1`).
    pub generate: Var,
    /// Copy switch probability (`1 x 1`).
    pub switch: Var,
}

/// One decoder step: LSTM over `[embed(prev); previous attention]`, memory
/// update, attention, then the generation and switch heads.
pub fn decode_step_on_tape(
    tape: &mut Tape<'_>,
    model: &Model,
    input: &TableInput,
    ctx: EncoderContext,
    state: &StateVars,
    prev: usize,
    input_dropout: Option<Var>,
) -> Result<StepVars> {
    let params = &model.params;
    let prev = if prev < model.vocabs.words.len() {
        prev
    } else {
        UNK
    };
    let table = tape.param(params.word_embedding);
    let emb = tape.lookup(table, &[prev])?;
    let mut x = tape.vconcat(&[emb, state.attention])?;
    if let Some(mask) = input_dropout {
        x = tape.mul(x, mask)?;
    }
    let mut hidden = Vec::with_capacity(params.decoder_layers.len());
    let mut cell = Vec::with_capacity(params.decoder_layers.len());
    for (l, w) in params.decoder_layers.iter().enumerate() {
        let (h, c) = lstm_step(tape, w, x, state.hidden[l], state.cell[l])?;
        hidden.push(h);
        cell.push(c);
        x = h;
    }
    let top = x;

    let mut memory_update = None;
    let memory = match model.config.variant.memory_mode() {
        None => None,
        Some(MemoryMode::Static) => ctx.initial_memory,
        Some(mode) => {
            let prev_memory = state
                .memory
                .ok_or_else(|| Error::Usage("dynamic memory state missing".into()))?;
            let mem = params
                .memory
                .as_ref()
                .expect("memory variant has memory params");
            let update = memory_step_on_tape(tape, mem, mode, top, prev_memory)?;
            memory_update = Some(update);
            Some(update.memory)
        }
    };
    let attention = match memory {
        None => flat_attention_on_tape(tape, params, ctx.outputs, ctx.keys, top)?,
        Some(u) => {
            hierarchical_attention_on_tape(tape, params, input, ctx.outputs, ctx.keys, u, top)?
        }
    };

    let w_y = tape.param(params.output_weight);
    let b_y = tape.param(params.output_bias);
    let logits = tape.matmul(w_y, attention.attention)?;
    let logits = tape.add(logits, b_y)?;
    let generate = tape.softmax(logits, Some(model.generation_mask()))?;
    let w_s = tape.param(params.copy_weight);
    let b_s = tape.param(params.copy_bias);
    let switch = tape.matmul(w_s, attention.attention)?;
    let switch = tape.add(switch, b_s)?;
    let switch = tape.sigmoid(switch);

    Ok(StepVars {
        state: StateVars {
            hidden,
            cell,
            attention: attention.attention,
            memory,
        },
        top,
        attention,
        memory_update,
        generate,
        switch,
    })
}

/// Log of the mixed probability of `target`:
/// `(1 − s)·p_gen(target) + s·Σ_{j: value_j = target} w_j / Σ_{j eligible} w_j`.
/// With no copyable record the switch is ignored and `p_gen` is used alone.
pub fn target_log_prob_on_tape(
    tape: &mut Tape<'_>,
    step: &StepVars,
    copy: &CopyTable,
    target: usize,
) -> Result<Var> {
    if copy.eligible.is_empty() {
        if target >= copy.vocab_size {
            return Err(Error::Domain(format!(
                "target id {target} outside the vocabulary"
            )));
        }
        let p = tape.pick(step.generate, target)?;
        return Ok(tape.log(p));
    }
    let mut parts = Vec::with_capacity(2);
    if target < copy.vocab_size {
        let p = tape.pick(step.generate, target)?;
        let off = tape.one_minus(step.switch);
        parts.push(tape.mul(off, p)?);
    }
    let matches = copy.records_for(target);
    if !matches.is_empty() {
        let hit = tape.sum_at(step.attention.copy_weights, &matches)?;
        let total = tape.sum_at(step.attention.copy_weights, &copy.eligible)?;
        let p = tape.div(hit, total)?;
        parts.push(tape.mul(step.switch, p)?);
    }
    let prob = match parts[..] {
        [p] => p,
        [a, b] => tape.add(a, b)?,
        _ => {
            return Err(Error::Domain(format!(
                "target id {target} can be neither generated nor copied"
            )))
        }
    };
    Ok(tape.log(prob))
}

/// Decoder state between steps, as values.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<Matrix>,
    pub cell: Vec<Matrix>,
    pub attention: Matrix,
    pub memory: Option<Matrix>,
    /// Tokens consumed so far.
    pub step: usize,
}

impl DecoderState {
    pub fn initial(model: &Model, table: &EncodedTable) -> Self {
        let layers = model.config.layers;
        DecoderState {
            hidden: vec![table.init_hidden.clone(); layers],
            cell: vec![table.init_cell.clone(); layers],
            attention: Matrix::zeros(model.config.hidden, 1),
            memory: match model.config.variant.memory_mode() {
                Some(MemoryMode::Dynamic | MemoryMode::Gated) => table.initial_memory.clone(),
                _ => None,
            },
            step: 0,
        }
    }
}

/// Output distribution of one step, with its components.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDistribution {
    /// Probability of copying.
    pub switch: f64,
    /// Generation distribution over the word vocabulary.
    pub generate: Vec<f64>,
    /// Copy distribution over records (zero for non-copyable records).
    pub copy: Vec<f64>,
    /// Mixture over the extended output space.
    pub mixed: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(switch: f64, generate: Vec<f64>, copy_weights: &[f64], table: &CopyTable) -> Self {
        let total: f64 = table.eligible.iter().map(|&j| copy_weights[j]).sum();
        let switch = if table.eligible.is_empty() {
            0.0
        } else {
            switch
        };
        let mut copy = vec![0.0; copy_weights.len()];
        if !table.eligible.is_empty() {
            for &j in &table.eligible {
                copy[j] = copy_weights[j] / total;
            }
        }
        let mut mixed = vec![0.0; table.extended_size()];
        for (m, g) in mixed.iter_mut().zip(&generate) {
            *m = (1.0 - switch) * g;
        }
        for (j, target) in table.record_target.iter().enumerate() {
            if let Some(id) = target {
                mixed[*id] += switch * copy[j];
            }
        }
        TokenDistribution {
            switch,
            generate,
            copy,
            mixed,
        }
    }
}

/// Everything one value-level step produces.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub distribution: TokenDistribution,
    pub state: DecoderState,
    pub attention: AttentionOutput,
}

pub fn decode_step(
    model: &Model,
    table: &EncodedTable,
    state: &DecoderState,
    prev: usize,
) -> Result<StepResult> {
    let mut tape = Tape::with_params(&model.store);
    let ctx = EncoderContext {
        outputs: tape.borrowed(&table.outputs),
        keys: tape.borrowed(&table.keys),
        initial_memory: table.initial_memory.as_ref().map(|m| tape.borrowed(m)),
    };
    let vars = StateVars {
        hidden: state.hidden.iter().map(|h| tape.borrowed(h)).collect(),
        cell: state.cell.iter().map(|c| tape.borrowed(c)).collect(),
        attention: tape.borrowed(&state.attention),
        memory: state.memory.as_ref().map(|m| tape.borrowed(m)),
    };
    let step = decode_step_on_tape(&mut tape, model, &table.input, ctx, &vars, prev, None)?;
    tape.check_finite()?;
    let attention = AttentionOutput {
        context: tape.value(step.attention.context).clone(),
        record_weights: tape.value(step.attention.record_weights).data().to_vec(),
        entity_weights: step
            .attention
            .entity_weights
            .map(|p| tape.value(p).data().to_vec()),
        entity_contexts: step
            .attention
            .entity_contexts
            .map(|s| tape.value(s).clone()),
        copy_weights: tape.value(step.attention.copy_weights).data().to_vec(),
        attention: tape.value(step.attention.attention).clone(),
    };
    let distribution = TokenDistribution::new(
        tape.scalar(step.switch),
        tape.value(step.generate).data().to_vec(),
        &attention.copy_weights,
        &table.input.copy,
    );
    let next = DecoderState {
        hidden: step
            .state
            .hidden
            .iter()
            .map(|&h| tape.value(h).clone())
            .collect(),
        cell: step
            .state
            .cell
            .iter()
            .map(|&c| tape.value(c).clone())
            .collect(),
        attention: tape.value(step.state.attention).clone(),
        memory: match model.config.variant.memory_mode() {
            Some(MemoryMode::Dynamic | MemoryMode::Gated) => {
                step.state.memory.map(|m| tape.value(m).clone())
            }
            _ => None,
        },
        step: state.step + 1,
    };
    Ok(StepResult {
        distribution,
        state: next,
        attention,
    })
}
