use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Parameter handles of one LSTM cell. Gate rows are ordered input, forget,
/// candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(LstmWeights {
            w_input: store.add_uniform(&format!("{prefix}.w_input"), 4 * hidden, input, seed)?,
            w_hidden: store.add_uniform(&format!("{prefix}.w_hidden"), 4 * hidden, hidden, seed)?,
            bias: store.add_uniform(&format!("{prefix}.bias"), 4 * hidden, 1, seed)?,
            hidden,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let w_hidden = store.require(&format!("{prefix}.w_hidden"))?;
        Ok(LstmWeights {
            w_input: store.require(&format!("{prefix}.w_input"))?,
            w_hidden,
            bias: store.require(&format!("{prefix}.bias"))?,
            hidden: store.value(w_hidden).cols(),
        })
    }
}

/// One LSTM step on the tape. Returns `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape<'_>,
    w: &LstmWeights,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let hsz = w.hidden;
    if tape.shape(h_prev) != (hsz, 1) || tape.shape(c_prev) != (hsz, 1) {
        return Err(Error::dim("lstm_cell state", tape.shape(h_prev), (hsz, 1)));
    }
    let wi = tape.param(w.w_input);
    let wh = tape.param(w.w_hidden);
    let b = tape.param(w.bias);
    let a = tape.matmul(wi, x)?;
    let r = tape.matmul(wh, h_prev)?;
    let pre = tape.add(a, r)?;
    let pre = tape.add(pre, b)?;
    let i_pre = tape.slice_rows(pre, 0, hsz)?;
    let f_pre = tape.slice_rows(pre, hsz, hsz)?;
    let g_pre = tape.slice_rows(pre, 2 * hsz, hsz)?;
    let o_pre = tape.slice_rows(pre, 3 * hsz, hsz)?;
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let g = tape.tanh(g_pre);
    let o = tape.sigmoid(o_pre);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Value-level LSTM cell: evaluates [`lstm_step`] on a throwaway tape.
pub fn lstm_cell(
    store: &ParamStore,
    w: &LstmWeights,
    x: &Matrix,
    h_prev: &Matrix,
    c_prev: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let mut tape = Tape::with_params(store);
    let xv = tape.borrowed(x);
    let hv = tape.borrowed(h_prev);
    let cv = tape.borrowed(c_prev);
    let (h, c) = lstm_step(&mut tape, w, xv, hv, cv)?;
    tape.check_finite()?;
    Ok((tape.value(h).clone(), tape.value(c).clone()))
}
