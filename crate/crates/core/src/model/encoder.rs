//! Record encoder: feature embeddings → record vectors → encoder outputs,
//! entity aggregates and the initial decoder state.

use super::config::{EncoderMode, ModelConfig};
use super::decoder::CopyTable;
use super::params::ModelParams;
use crate::data::{EntityGroups, GameInstance, Vocabularies};
use crate::error::{Error, Result};
use crate::numerics::{lstm_step, Matrix, ParamStore, Tape, Var};

/// Vocabulary ids and entity layout of one table, independent of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TableInput {
    /// `feature_ids[role][j]`.
    pub feature_ids: Vec<Vec<usize>>,
    pub groups: EntityGroups,
    /// Widest entity group; the grid is `K x max_group`.
    pub max_group: usize,
    /// Row-major grid cell → record index, `None` for padding.
    pub grid_index: Vec<Option<usize>>,
    pub grid_mask: Vec<bool>,
    /// Record index → flat grid cell.
    pub cell_of: Vec<usize>,
    /// `J x K` matrix whose column k averages entity k's records.
    pub averaging: Matrix,
    pub values: Vec<String>,
    pub copy: CopyTable,
}

impl TableInput {
    pub fn new(game: &GameInstance, vocabs: &Vocabularies) -> Result<Self> {
        if game.records.is_empty() {
            return Err(Error::Schema(format!("game {} has no records", game.id)));
        }
        let l = vocabs.features.len();
        let mut feature_ids = vec![Vec::with_capacity(game.records.len()); l];
        for rec in &game.records {
            if rec.features.len() != l {
                return Err(Error::Schema(format!(
                    "game {}: record with {} features, model expects {l}",
                    game.id,
                    rec.features.len()
                )));
            }
            for (role, f) in rec.features.iter().enumerate() {
                feature_ids[role].push(vocabs.features[role].id(f));
            }
        }
        let values: Vec<String> = game.records.iter().map(|r| r.value().to_string()).collect();
        let groups = game.entity_groups();
        let (k_count, z_count) = (groups.len(), groups.max_group_size());
        let mut grid_index = vec![None; k_count * z_count];
        let mut cell_of = vec![0; game.records.len()];
        let mut averaging = Matrix::zeros(game.records.len(), k_count);
        for (k, members) in groups.members.iter().enumerate() {
            for (z, &j) in members.iter().enumerate() {
                grid_index[k * z_count + z] = Some(j);
                cell_of[j] = k * z_count + z;
                averaging.set(j, k, 1.0 / members.len() as f64);
            }
        }
        Ok(TableInput {
            feature_ids,
            grid_mask: grid_index.iter().map(Option::is_some).collect(),
            groups,
            max_group: z_count,
            grid_index,
            cell_of,
            averaging,
            copy: CopyTable::new(&values, &vocabs.words),
            values,
        })
    }

    pub fn num_records(&self) -> usize {
        self.values.len()
    }

    pub fn num_entities(&self) -> usize {
        self.groups.len()
    }

    /// Grid coordinates `(k, z)` of record `j`.
    pub fn position(&self, j: usize) -> (usize, usize) {
        let cell = self.cell_of[j];
        (cell / self.max_group, cell % self.max_group)
    }

    /// Record at grid cell `(k, z)`, if the cell is not padding.
    pub fn record_at(&self, k: usize, z: usize) -> Option<usize> {
        if z >= self.max_group {
            return None;
        }
        self.grid_index
            .get(k * self.max_group + z)
            .copied()
            .flatten()
    }
}

/// Encoder results as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    /// `n x J` record vectors.
    pub records: Var,
    /// `n x J` encoder outputs.
    pub outputs: Var,
    /// `n x K` entity aggregates.
    pub entities: Var,
    pub init_hidden: Var,
    pub init_cell: Var,
}

/// Record vectors `relu(W [emb_1; ...; emb_L] + b)` for every record, as columns.
pub fn embed_records(tape: &mut Tape<'_>, params: &ModelParams, input: &TableInput) -> Result<Var> {
    let mut parts = Vec::with_capacity(params.feature_embeddings.len());
    for (&table, ids) in params.feature_embeddings.iter().zip(&input.feature_ids) {
        let t = tape.param(table);
        parts.push(tape.lookup(t, ids)?);
    }
    let concat = tape.vconcat(&parts)?;
    let w = tape.param(params.record_weight);
    let b = tape.param(params.record_bias);
    let affine = tape.matmul(w, concat)?;
    let affine = tape.add_col(affine, b)?;
    Ok(tape.relu(affine))
}

/// Per-entity mean of record vectors, `n x K`.
pub fn entity_average<'a>(tape: &mut Tape<'a>, records: Var, input: &'a TableInput) -> Result<Var> {
    let avg = tape.borrowed(&input.averaging);
    tape.matmul(records, avg)
}

fn column(tape: &mut Tape<'_>, m: Var, j: usize) -> Result<Var> {
    let (rows, cols) = tape.shape(m);
    tape.gather(
        m,
        (0..rows).map(|r| Some(r * cols + j)).collect(),
        rows,
        1,
        0.0,
    )
}

/// Flat path: outputs are the record vectors; the decoder starts from their mean.
fn encode_flat(tape: &mut Tape<'_>, records: Var) -> Result<(Var, Var, Var)> {
    let (n, j) = tape.shape(records);
    let mean = tape.constant(Matrix::filled(j, 1, 1.0 / j as f64));
    let h0 = tape.matmul(records, mean)?;
    let c0 = tape.constant(Matrix::zeros(n, 1));
    Ok((records, h0, c0))
}

/// Bidirectional LSTM over records; outputs and initial state are linear
/// projections of concatenated forward/backward states.
fn encode_sequential(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    records: Var,
) -> Result<(Var, Var, Var)> {
    let seq = params
        .sequential
        .as_ref()
        .ok_or_else(|| Error::Usage("model has no sequential encoder".into()))?;
    let j_count = tape.shape(records).1;
    let half = seq.forward.hidden;
    let inputs: Vec<Var> = (0..j_count)
        .map(|j| column(tape, records, j))
        .collect::<Result<_>>()?;
    let zero = Matrix::zeros(half, 1);
    let run = |tape: &mut Tape<'_>,
               w,
               order: &mut dyn Iterator<Item = usize>|
     -> Result<Vec<(Var, Var)>> {
        let mut h = tape.constant(zero.clone());
        let mut c = tape.constant(zero.clone());
        let mut states = vec![(h, c); j_count];
        for j in order {
            (h, c) = lstm_step(tape, w, inputs[j], h, c)?;
            states[j] = (h, c);
        }
        Ok(states)
    };
    let fwd = run(tape, &seq.forward, &mut (0..j_count))?;
    let bwd = run(tape, &seq.backward, &mut (0..j_count).rev())?;
    let mut cols = Vec::with_capacity(j_count);
    for j in 0..j_count {
        cols.push(tape.vconcat(&[fwd[j].0, bwd[j].0])?);
    }
    let stacked = tape.hconcat(&cols)?;
    let w_out = tape.param(seq.output);
    let outputs = tape.matmul(w_out, stacked)?;
    let last_h = tape.vconcat(&[fwd[j_count - 1].0, bwd[0].0])?;
    let last_c = tape.vconcat(&[fwd[j_count - 1].1, bwd[0].1])?;
    let w_h = tape.param(seq.init_hidden);
    let w_c = tape.param(seq.init_cell);
    let h0 = tape.matmul(w_h, last_h)?;
    let c0 = tape.matmul(w_c, last_c)?;
    Ok((outputs, h0, c0))
}

/// Runs the encoder on `tape`. `record_dropout` (an `n x J` mask, already
/// scaled) multiplies the record vectors when training.
pub fn encode_on_tape<'a>(
    tape: &mut Tape<'a>,
    params: &ModelParams,
    config: &ModelConfig,
    input: &'a TableInput,
    record_dropout: Option<&'a Matrix>,
) -> Result<EncoderVars> {
    let mut records = embed_records(tape, params, input)?;
    if let Some(mask) = record_dropout {
        let m = tape.borrowed(mask);
        records = tape.mul(records, m)?;
    }
    let entities = entity_average(tape, records, input)?;
    let (outputs, init_hidden, init_cell) = match config.encoder {
        EncoderMode::Flat => encode_flat(tape, records)?,
        EncoderMode::Sequential => encode_sequential(tape, params, records)?,
    };
    Ok(EncoderVars {
        records,
        outputs,
        entities,
        init_hidden,
        init_cell,
    })
}

/// Encoder values for decoding, plus the parameter-dependent quantities the
/// decoder reuses at every step.
#[derive(Clone, Debug)]
pub struct EncodedTable {
    pub input: TableInput,
    /// `n x J` record vectors.
    pub records: Matrix,
    /// `n x J` encoder outputs.
    pub outputs: Matrix,
    /// `n x K` entity aggregates.
    pub entities: Matrix,
    pub init_hidden: Matrix,
    pub init_cell: Matrix,
    /// `J x n` attention keys, `(W_score · outputs)ᵀ`.
    pub keys: Matrix,
    /// `p x K` memories before the first decoding step.
    pub initial_memory: Option<Matrix>,
}

impl EncodedTable {
    /// Encoder output for grid cell `(k, z)`.
    pub fn grid_cell(&self, k: usize, z: usize) -> Option<Matrix> {
        self.input.record_at(k, z).map(|j| self.outputs.col(j))
    }
}

/// Attention keys `(W_score · E)ᵀ`.
pub fn attention_keys(tape: &mut Tape<'_>, params: &ModelParams, outputs: Var) -> Result<Var> {
    let w = tape.param(params.attention_score);
    let projected = tape.matmul(w, outputs)?;
    Ok(tape.transpose(projected))
}

/// Initial entity memories `W_init · X`.
pub fn initial_memory(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    entities: Var,
) -> Result<Option<Var>> {
    match &params.memory {
        None => Ok(None),
        Some(m) => {
            let w = tape.param(m.init);
            Ok(Some(tape.matmul(w, entities)?))
        }
    }
}

pub fn encode(
    store: &ParamStore,
    params: &ModelParams,
    config: &ModelConfig,
    input: &TableInput,
) -> Result<EncodedTable> {
    let mut tape = Tape::with_params(store);
    let vars = encode_on_tape(&mut tape, params, config, input, None)?;
    let keys = attention_keys(&mut tape, params, vars.outputs)?;
    let memory = initial_memory(&mut tape, params, vars.entities)?;
    tape.check_finite()?;
    Ok(EncodedTable {
        input: input.clone(),
        records: tape.value(vars.records).clone(),
        outputs: tape.value(vars.outputs).clone(),
        entities: tape.value(vars.entities).clone(),
        init_hidden: tape.value(vars.init_hidden).clone(),
        init_cell: tape.value(vars.init_cell).clone(),
        keys: tape.value(keys).clone(),
        initial_memory: memory.map(|m| tape.value(m).clone()),
    })
}

#[cfg(test)]
mod tests {
    use crate::data::RecordSchema;
    use crate::fixtures::micro_model;
    use crate::model::Variant;

    #[test]
    fn entity_aggregate_is_mean_of_member_records() {
        let (model, game) = micro_model(RecordSchema::Rw4, Variant::Hier, 1).unwrap();
        let table = model.encode(&model.prepare(&game).unwrap()).unwrap();
        for (k, members) in table.input.groups.members.iter().enumerate() {
            for r in 0..table.records.rows() {
                let mean = members
                    .iter()
                    .map(|&j| table.records.get(r, j))
                    .sum::<f64>()
                    / members.len() as f64;
                assert!((table.entities.get(r, k) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_encoder_starts_from_record_mean() {
        let (model, game) = micro_model(RecordSchema::Rw4, Variant::Edcc, 1).unwrap();
        let table = model.encode(&model.prepare(&game).unwrap()).unwrap();
        assert_eq!(table.outputs, table.records);
        let j = table.records.cols() as f64;
        for r in 0..table.records.rows() {
            let mean = table.records.row(r).iter().sum::<f64>() / j;
            assert!((table.init_hidden.get(r, 0) - mean).abs() < 1e-12);
        }
        assert!(table.records.data().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn sequential_encoder_shapes() {
        let (model, game) = micro_model(RecordSchema::Mlb6, Variant::Gate, 1).unwrap();
        let table = model.encode(&model.prepare(&game).unwrap()).unwrap();
        let n = model.config.hidden;
        assert_eq!(
            (table.outputs.rows(), table.outputs.cols()),
            (n, game.records.len())
        );
        assert_eq!(
            (table.keys.rows(), table.keys.cols()),
            (game.records.len(), n)
        );
        assert_eq!(table.init_cell.rows(), n);
    }
}
