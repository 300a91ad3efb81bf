//! Per-entity memories, stored as the columns of a `p x K` matrix.

use super::config::MemoryMode;
use super::params::MemoryParams;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamStore, Tape, Var};

/// Intermediate quantities of one update, exposed for inspection.
#[derive(Clone, Copy, Debug)]
pub struct MemoryUpdate {
    pub memory: Var,
    /// Update gate (`p x 1`); `None` when fixed at one or static.
    pub gate: Option<Var>,
    /// Per-entity change weights (`p x K`).
    pub change: Option<Var>,
    /// Candidate memory (`p x 1`), shared by every entity.
    pub candidate: Option<Var>,
}

/// One memory update driven by decoder state `hidden`:
///
/// ```text
/// gate      = σ(W_gate h + b_gate)                (fixed at 1 in dynamic mode)
/// change_k  = gate ⊙ σ(W_ch h + b_ch + W_cm u_k + b_cm)
/// candidate = W_cand h
/// u_k'      = (1 − change_k) ⊙ u_k + change_k ⊙ candidate
/// ```
pub fn memory_step_on_tape(
    tape: &mut Tape<'_>,
    params: &MemoryParams,
    mode: MemoryMode,
    hidden: Var,
    memory: Var,
) -> Result<MemoryUpdate> {
    if mode == MemoryMode::Static {
        return Ok(MemoryUpdate {
            memory,
            gate: None,
            change: None,
            candidate: None,
        });
    }
    let missing = || Error::Usage(format!("memory parameters missing for {mode:?} mode"));
    let (w_ch, b_ch) = params.change_hidden.ok_or_else(missing)?;
    let (w_cm, b_cm) = params.change_memory.ok_or_else(missing)?;
    let w_cand = params.candidate.ok_or_else(missing)?;

    let w_ch = tape.param(w_ch);
    let b_ch = tape.param(b_ch);
    let from_hidden = tape.matmul(w_ch, hidden)?;
    let from_hidden = tape.add(from_hidden, b_ch)?;
    let b_cm = tape.param(b_cm);
    let shift = tape.add(from_hidden, b_cm)?;
    let w_cm = tape.param(w_cm);
    let from_memory = tape.matmul(w_cm, memory)?;
    let pre = tape.add_col(from_memory, shift)?;
    let mut change = tape.sigmoid(pre);
    let mut gate = None;
    if mode == MemoryMode::Gated {
        let (w_g, b_g) = params.update_gate.ok_or_else(missing)?;
        let w_g = tape.param(w_g);
        let b_g = tape.param(b_g);
        let g = tape.matmul(w_g, hidden)?;
        let g = tape.add(g, b_g)?;
        let g = tape.sigmoid(g);
        change = tape.mul_col(change, g)?;
        gate = Some(g);
    }
    let w_cand = tape.param(w_cand);
    let candidate = tape.matmul(w_cand, hidden)?;
    let keep = tape.one_minus(change);
    let kept = tape.mul(keep, memory)?;
    let written = tape.mul_col(change, candidate)?;
    let memory = tape.add(kept, written)?;
    Ok(MemoryUpdate {
        memory,
        gate,
        change: Some(change),
        candidate: Some(candidate),
    })
}

/// Initial memories `W_init · x_k` for aggregates `entities` (`n x K`).
pub fn init_memory(store: &ParamStore, params: &MemoryParams, entities: &Matrix) -> Result<Matrix> {
    store.value(params.init).matmul(entities)
}

/// Value-level update; returns the new `p x K` memory matrix.
pub fn memory_step(
    store: &ParamStore,
    params: &MemoryParams,
    mode: MemoryMode,
    hidden: &Matrix,
    memory: &Matrix,
) -> Result<Matrix> {
    let mut tape = Tape::with_params(store);
    let h = tape.borrowed(hidden);
    let u = tape.borrowed(memory);
    let update = memory_step_on_tape(&mut tape, params, mode, h, u)?;
    tape.check_finite()?;
    Ok(tape.value(update.memory).clone())
}
