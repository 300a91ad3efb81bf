//! Flat attention over encoder outputs and hierarchical attention over
//! entities, then their records.

use super::encoder::{EncodedTable, TableInput};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct AttentionVars {
    /// Context vector `q` (`n x 1`).
    pub context: Var,
    /// Record weights (`J x 1`): global for flat attention, within-entity
    /// for hierarchical attention.
    pub record_weights: Var,
    /// Entity weights `Ψ` (`K x 1`), hierarchical only.
    pub entity_weights: Option<Var>,
    /// Entity contexts `s_k` as columns (`n x K`), hierarchical only.
    pub entity_contexts: Option<Var>,
    /// Record-level weights used by the copy distribution (`J x 1`).
    pub copy_weights: Var,
    /// Attention vector `tanh(W_combine [h; q])`.
    pub attention: Var,
}

fn combine(tape: &mut Tape<'_>, params: &ModelParams, hidden: Var, context: Var) -> Result<Var> {
    let w = tape.param(params.attention_combine);
    let joined = tape.vconcat(&[hidden, context])?;
    let pre = tape.matmul(w, joined)?;
    Ok(tape.tanh(pre))
}

/// `α ∝ exp(hᵀ W_score e_j)`, `q = Σ α_j e_j`.
pub fn flat_attention_on_tape(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    outputs: Var,
    keys: Var,
    hidden: Var,
) -> Result<AttentionVars> {
    let scores = tape.matmul(keys, hidden)?;
    let alpha = tape.softmax(scores, None)?;
    let context = tape.matmul(outputs, alpha)?;
    let attention = combine(tape, params, hidden, context)?;
    Ok(AttentionVars {
        context,
        record_weights: alpha,
        entity_weights: None,
        entity_contexts: None,
        copy_weights: alpha,
        attention,
    })
}

/// Record attention normalised within each entity, entity attention over
/// memories `u_k`, and `q = Σ_k Ψ_k s_k`.
pub fn hierarchical_attention_on_tape(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    input: &TableInput,
    outputs: Var,
    keys: Var,
    memory: Var,
    hidden: Var,
) -> Result<AttentionVars> {
    let mem = params
        .memory
        .as_ref()
        .ok_or_else(|| Error::Usage("hierarchical attention needs memory parameters".into()))?;
    let (k_count, z_count, j_count) = (input.num_entities(), input.max_group, input.num_records());
    if tape.shape(memory).1 != k_count {
        return Err(Error::dim(
            "hierarchical attention memories",
            tape.shape(memory),
            (0, k_count),
        ));
    }
    let scores = tape.matmul(keys, hidden)?;
    let grid = tape.gather(scores, input.grid_index.clone(), k_count, z_count, 0.0)?;
    let alpha_grid = tape.softmax_rows(grid, Some(&input.grid_mask))?;
    let alpha = tape.gather(
        alpha_grid,
        input.cell_of.iter().map(|&c| Some(c)).collect(),
        j_count,
        1,
        0.0,
    )?;
    let spread = tape.spread(alpha, &input.groups.group_of, k_count)?;
    let entity_contexts = tape.matmul(outputs, spread)?;

    let w_h = tape.param(mem.entity_score);
    let h_row = tape.transpose(hidden);
    let projected = tape.matmul(h_row, w_h)?;
    let entity_scores = tape.matmul(projected, memory)?;
    let entity_scores = tape.transpose(entity_scores);
    let psi = tape.softmax(entity_scores, None)?;
    let context = tape.matmul(entity_contexts, psi)?;

    let psi_per_record = tape.gather(
        psi,
        input.groups.group_of.iter().map(|&k| Some(k)).collect(),
        j_count,
        1,
        0.0,
    )?;
    let copy_weights = tape.mul(alpha, psi_per_record)?;
    let attention = combine(tape, params, hidden, context)?;
    Ok(AttentionVars {
        context,
        record_weights: alpha,
        entity_weights: Some(psi),
        entity_contexts: Some(entity_contexts),
        copy_weights,
        attention,
    })
}

/// Attention results as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub context: Matrix,
    pub record_weights: Vec<f64>,
    pub entity_weights: Option<Vec<f64>>,
    pub entity_contexts: Option<Matrix>,
    pub copy_weights: Vec<f64>,
    pub attention: Matrix,
}

impl AttentionOutput {
    fn from_tape(tape: &Tape<'_>, v: &AttentionVars) -> Result<Self> {
        tape.check_finite()?;
        Ok(AttentionOutput {
            context: tape.value(v.context).clone(),
            record_weights: tape.value(v.record_weights).data().to_vec(),
            entity_weights: v.entity_weights.map(|p| tape.value(p).data().to_vec()),
            entity_contexts: v.entity_contexts.map(|s| tape.value(s).clone()),
            copy_weights: tape.value(v.copy_weights).data().to_vec(),
            attention: tape.value(v.attention).clone(),
        })
    }

    /// Within-entity record weights laid out on the `K x Z` grid (0 on padding).
    pub fn record_grid(&self, input: &TableInput) -> Vec<Vec<f64>> {
        (0..input.num_entities())
            .map(|k| {
                (0..input.max_group)
                    .map(|z| {
                        input
                            .record_at(k, z)
                            .map_or(0.0, |j| self.record_weights[j])
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn flat_attention(
    store: &ParamStore,
    params: &ModelParams,
    table: &EncodedTable,
    hidden: &Matrix,
) -> Result<AttentionOutput> {
    let mut tape = Tape::with_params(store);
    let e = tape.borrowed(&table.outputs);
    let keys = tape.borrowed(&table.keys);
    let h = tape.borrowed(hidden);
    let v = flat_attention_on_tape(&mut tape, params, e, keys, h)?;
    AttentionOutput::from_tape(&tape, &v)
}

pub fn hierarchical_attention(
    store: &ParamStore,
    params: &ModelParams,
    table: &EncodedTable,
    memory: &Matrix,
    hidden: &Matrix,
) -> Result<AttentionOutput> {
    let mut tape = Tape::with_params(store);
    let e = tape.borrowed(&table.outputs);
    let keys = tape.borrowed(&table.keys);
    let u = tape.borrowed(memory);
    let h = tape.borrowed(hidden);
    let v = hierarchical_attention_on_tape(&mut tape, params, &table.input, e, keys, u, h)?;
    AttentionOutput::from_tape(&tape, &v)
}

/// Hierarchical attention over the memories as initialised, never updated.
pub fn static_entity_attention(
    store: &ParamStore,
    params: &ModelParams,
    table: &EncodedTable,
    hidden: &Matrix,
) -> Result<AttentionOutput> {
    let memory = table
        .initial_memory
        .as_ref()
        .ok_or_else(|| Error::Usage("encoded table has no entity memories".into()))?;
    hierarchical_attention(store, params, table, memory, hidden)
}
