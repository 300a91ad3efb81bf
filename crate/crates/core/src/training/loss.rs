//! Sequence negative log-likelihood with truncated backpropagation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::vocab::BOS;
use crate::data::GameInstance;
use crate::error::{Error, Result};
use crate::model::config::MemoryMode;
use crate::model::decoder::{
    decode_step_on_tape, target_log_prob_on_tape, EncoderContext, StateVars,
};
use crate::model::encoder::{attention_keys, encode_on_tape, initial_memory};
use crate::model::{DecoderState, Model, TableInput};
use crate::numerics::{grad_check_against, GradCheckReport, Matrix, ParamGrads, Tape, Var};

/// A prepared training pair: table input and output ids (end token included).
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub input: TableInput,
    pub targets: Vec<usize>,
}

impl Example {
    pub fn new(model: &Model, game: &GameInstance) -> Result<Self> {
        let input = model.prepare(game)?;
        let targets = model.target_ids(&input, &game.summary);
        Ok(Example {
            id: game.id.clone(),
            input,
            targets,
        })
    }
}

pub fn prepare_examples(model: &Model, games: &[GameInstance]) -> Result<Vec<Example>> {
    games.iter().map(|g| Example::new(model, g)).collect()
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rate: f64) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized to fit")
}

/// Loss of one sequence and, when requested, its parameter gradients.
#[derive(Clone, Debug)]
pub struct SequenceLoss {
    /// `−Σ_t log p(y_t)` over all targets.
    pub loss: f64,
    pub tokens: usize,
    pub grads: Option<ParamGrads>,
}

/// Loss of `targets` on `tape`, starting after `prev` from `carried` (or the
/// encoder's initial state). Returns `−Σ log p(y_t)` and the final state.
/// `input_masks` holds one decoder-input dropout mask per target, or none.
#[allow(clippy::too_many_arguments)]
pub fn window_loss_on_tape<'a>(
    tape: &mut Tape<'a>,
    model: &Model,
    input: &'a TableInput,
    record_mask: Option<&'a Matrix>,
    targets: &[usize],
    prev: usize,
    carried: Option<&'a DecoderState>,
    input_masks: &'a [Matrix],
) -> Result<(Var, StateVars)> {
    let config = &model.config;
    let dynamic = matches!(
        config.variant.memory_mode(),
        Some(MemoryMode::Dynamic | MemoryMode::Gated)
    );
    let enc = encode_on_tape(tape, &model.params, config, input, record_mask)?;
    let keys = attention_keys(tape, &model.params, enc.outputs)?;
    let memory0 = initial_memory(tape, &model.params, enc.entities)?;
    let ctx = EncoderContext {
        outputs: enc.outputs,
        keys,
        initial_memory: memory0,
    };
    let mut state = match carried {
        None => {
            let attention = tape.constant(Matrix::zeros(config.hidden, 1));
            StateVars {
                hidden: vec![enc.init_hidden; config.layers],
                cell: vec![enc.init_cell; config.layers],
                attention,
                memory: if dynamic { memory0 } else { None },
            }
        }
        Some(s) => StateVars {
            hidden: s.hidden.iter().map(|h| tape.borrowed(h)).collect(),
            cell: s.cell.iter().map(|c| tape.borrowed(c)).collect(),
            attention: tape.borrowed(&s.attention),
            memory: s.memory.as_ref().map(|m| tape.borrowed(m)),
        },
    };
    let mut prev = prev;
    let mut log_probs = Vec::with_capacity(targets.len());
    for (t, &y) in targets.iter().enumerate() {
        let mask = input_masks.get(t).map(|m| tape.borrowed(m));
        let step = decode_step_on_tape(tape, model, input, ctx, &state, prev, mask)?;
        log_probs.push(target_log_prob_on_tape(tape, &step, &input.copy, y)?);
        state = step.state;
        prev = y;
    }
    let stacked = tape.vconcat(&log_probs)?;
    let sum = tape.sum(stacked);
    Ok((tape.scale(sum, -1.0), state))
}

/// Untruncated `−Σ_t log p(y_t)` of an example on `tape`, without dropout.
pub fn sequence_loss_on_tape<'a>(
    tape: &mut Tape<'a>,
    model: &Model,
    example: &'a Example,
) -> Result<Var> {
    let (loss, _) = window_loss_on_tape(
        tape,
        model,
        &example.input,
        None,
        &example.targets,
        BOS,
        None,
        &[],
    )?;
    Ok(loss)
}

/// Tape gradients of the untruncated loss against central differences.
pub fn check_gradients(model: &Model, example: &Example, eps: f64) -> Result<GradCheckReport> {
    let analytic = {
        let mut tape = Tape::with_params(&model.store);
        let loss = sequence_loss_on_tape(&mut tape, model, example)?;
        tape.backward(loss)?
    };
    grad_check_against(&model.store, eps, &analytic, |store| {
        let mut tape = Tape::with_params(store);
        let loss = sequence_loss_on_tape(&mut tape, model, example)?;
        tape.check_finite()?;
        Ok(tape.scalar(loss))
    })
}

/// `−Σ_t log p(y_t | y_<t, table)` under the mixed copy/generate distribution.
///
/// The sequence is cut into windows of `window` targets. Each window records
/// its own tape, re-running the encoder, and starts from the previous
/// window's decoder state and entity memories as constants, so no gradient
/// crosses a window boundary. `dropout` (rate, generator) enables training
/// noise on record vectors and decoder inputs.
pub fn sequence_nll(
    model: &Model,
    example: &Example,
    window: usize,
    with_grads: bool,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<SequenceLoss> {
    if window == 0 {
        return Err(Error::Usage("BPTT window must be at least 1".into()));
    }
    let config = &model.config;
    let record_mask = match dropout.as_mut() {
        Some((rate, rng)) if *rate > 0.0 => Some(dropout_mask(
            rng,
            config.hidden,
            example.input.num_records(),
            *rate,
        )),
        _ => None,
    };
    let dynamic = matches!(
        config.variant.memory_mode(),
        Some(MemoryMode::Dynamic | MemoryMode::Gated)
    );
    let mut grads = with_grads.then(|| ParamGrads::new(model.store.len()));
    let mut total = 0.0;
    let mut carried: Option<DecoderState> = None;
    for (w, chunk) in example.targets.chunks(window).enumerate() {
        let start = w * window;
        let input_masks: Vec<Matrix> = match dropout.as_mut() {
            Some((rate, rng)) if *rate > 0.0 => chunk
                .iter()
                .map(|_| dropout_mask(rng, config.word_embed + config.hidden, 1, *rate))
                .collect(),
            _ => Vec::new(),
        };
        let prev = if start == 0 {
            BOS
        } else {
            example.targets[start - 1]
        };
        let mut tape = Tape::with_params(&model.store);
        let (loss, state) = window_loss_on_tape(
            &mut tape,
            model,
            &example.input,
            record_mask.as_ref(),
            chunk,
            prev,
            carried.as_ref(),
            &input_masks,
        )?;
        tape.check_finite()?;
        total += tape.scalar(loss);
        if let Some(g) = grads.as_mut() {
            g.merge(&tape.backward(loss)?);
        }
        let next = DecoderState {
            hidden: state
                .hidden
                .iter()
                .map(|&h| tape.value(h).clone())
                .collect(),
            cell: state.cell.iter().map(|&c| tape.value(c).clone()).collect(),
            attention: tape.value(state.attention).clone(),
            memory: if dynamic {
                state.memory.map(|m| tape.value(m).clone())
            } else {
                None
            },
            step: start + chunk.len(),
        };
        drop(tape);
        carried = Some(next);
    }
    Ok(SequenceLoss {
        loss: total,
        tokens: example.targets.len(),
        grads,
    })
}

/// Log-likelihood of `targets` computed step by step with the inference
/// decoder (no tape across steps).
pub fn decoder_log_likelihood(model: &Model, input: &TableInput, targets: &[usize]) -> Result<f64> {
    let table = model.encode(input)?;
    let mut state = model.initial_state(&table);
    let mut prev = BOS;
    let mut total = 0.0;
    for &y in targets {
        let step = model.decode_step(&table, &state, prev)?;
        let p = step.distribution.mixed.get(y).copied().unwrap_or(0.0);
        if p <= 0.0 {
            return Err(Error::Numeric(format!(
                "target id {y} has zero probability"
            )));
        }
        total += p.ln();
        state = step.state;
        prev = y;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::data::{Record, RecordSchema, Vocabulary};
    use crate::fixtures::micro_model;
    use crate::model::Variant;

    fn micro_example(schema: RecordSchema, variant: Variant) -> (Model, Example) {
        let (model, game) = micro_model(schema, variant, 7).unwrap();
        let ex = Example::new(&model, &game).unwrap();
        (model, ex)
    }

    #[test]
    fn targets_end_with_eos_and_map_oov_values_to_copy_ids() {
        let (model, ex) = micro_example(RecordSchema::Rw4, Variant::Gate);
        assert_eq!(ex.targets.len(), 7);
        assert_eq!(*ex.targets.last().unwrap(), crate::data::vocab::EOS);
        // "17" is outside the word vocabulary
        assert!(ex.targets[2] >= model.words().len());
    }

    #[test]
    fn decoder_likelihood_matches_training_loss() {
        for schema in [RecordSchema::Rw4, RecordSchema::Mlb6] {
            for variant in Variant::ALL {
                let (model, ex) = micro_example(schema, variant);
                let nll = sequence_nll(&model, &ex, 100, false, None).unwrap().loss;
                let ll = decoder_log_likelihood(&model, &ex.input, &ex.targets).unwrap();
                assert!((nll + ll).abs() < 1e-8, "{schema} {variant}: {nll} vs {ll}");
            }
        }
    }

    #[test]
    fn single_window_gradients_equal_untruncated_exactly() {
        for variant in Variant::ALL {
            let (model, ex) = micro_example(RecordSchema::Rw4, variant);
            let windowed = sequence_nll(&model, &ex, ex.targets.len(), true, None).unwrap();
            let wide = sequence_nll(&model, &ex, 10_000, true, None).unwrap();
            let mut tape = Tape::with_params(&model.store);
            let loss = sequence_loss_on_tape(&mut tape, &model, &ex).unwrap();
            let full = tape.backward(loss).unwrap();
            assert_eq!(windowed.loss, tape.scalar(loss));
            for id in model.store.ids() {
                assert_eq!(
                    windowed.grads.as_ref().unwrap().get(id),
                    full.get(id),
                    "{}",
                    model.store.name(id)
                );
                assert_eq!(wide.grads.as_ref().unwrap().get(id), full.get(id));
            }
        }
    }

    #[test]
    fn truncation_keeps_the_loss_but_cuts_gradient_paths() {
        for variant in Variant::ALL {
            let (model, ex) = micro_example(RecordSchema::Rw4, variant);
            let full = sequence_nll(&model, &ex, 100, true, None).unwrap();
            let cut = sequence_nll(&model, &ex, 2, true, None).unwrap();
            assert!((full.loss - cut.loss).abs() < 1e-10);
            let id = model.params.decoder_layers[0].w_hidden;
            assert_ne!(full.grads.unwrap().get(id), cut.grads.unwrap().get(id));
        }
    }

    #[test]
    fn uniform_generation_without_copy_gives_t_log_v() {
        let game = GameInstance {
            id: "u".into(),
            records: vec![
                Record::new(["-1", "A", "X", "HOME"]),
                Record::new(["-1", "B", "Y", "AWAY"]),
            ],
            summary: ["a", "b", "c", "a"].map(String::from).to_vec(),
        };
        let words = Vocabulary::from_tokens(&game.summary, 1);
        let features = (0..4)
            .map(|r| {
                Vocabulary::from_tokens(game.records.iter().map(|x| x.features[r].as_str()), 1)
            })
            .collect();
        let vocabs = crate::data::Vocabularies { words, features };
        for variant in Variant::ALL {
            let config = crate::model::ModelConfig::for_schema(RecordSchema::Rw4, 4, 3, variant);
            let mut model = Model::new(config, vocabs.clone()).unwrap();
            for id in model.store.ids().collect::<Vec<_>>() {
                model
                    .store
                    .value_mut(id)
                    .data_mut()
                    .iter_mut()
                    .for_each(|v| *v = 0.0);
            }
            let ex = Example::new(&model, &game).unwrap();
            // padding and the begin token are never generated
            let v = (model.words().len() - 2) as f64;
            let loss = sequence_nll(&model, &ex, 100, false, None).unwrap().loss;
            assert!((loss - 5.0 * v.ln()).abs() < 1e-12, "{variant}: {loss}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for schema in [RecordSchema::Rw4, RecordSchema::Mlb6] {
            for variant in Variant::ALL {
                let (model, ex) = micro_example(schema, variant);
                // a wider step than the default keeps roundoff below the tolerance
                let report = check_gradients(&model, &ex, 1e-4).unwrap();
                let worst = report.worst().unwrap();
                assert!(
                    report.passed(1e-4),
                    "{schema} {variant}: {} {}",
                    worst.name,
                    worst.max_relative_error
                );
            }
        }
    }

    #[test]
    fn dropout_is_reproducible_and_changes_the_loss() {
        let (model, ex) = micro_example(RecordSchema::Rw4, Variant::Gate);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sequence_nll(&model, &ex, 3, true, Some((0.3, &mut rng)))
                .unwrap()
                .loss
        };
        assert_eq!(run(1), run(1));
        assert_ne!(
            run(1),
            sequence_nll(&model, &ex, 3, false, None).unwrap().loss
        );
    }

    #[test]
    fn dropout_mask_is_zero_or_rescaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = dropout_mask(&mut rng, 50, 40, 0.25);
        let zeros = m.data().iter().filter(|&&v| v == 0.0).count();
        assert!(m
            .data()
            .iter()
            .all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        assert!((400..600).contains(&zeros), "{zeros}");
    }
}
