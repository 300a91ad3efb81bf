use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{prepare_examples, sequence_nll, Example};
use crate::data::GameInstance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{checkpoint, ParamGrads};

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay: f64,
    /// Last epoch (1-based) trained at the initial rate.
    pub decay_after: usize,
    pub epochs: usize,
    /// Decoder steps per truncated-backpropagation window.
    pub window: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Stop early once train perplexity falls below this value.
    pub stop_below_perplexity: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.15,
            decay: 0.97,
            decay_after: 4,
            epochs: 25,
            window: 100,
            batch_size: 5,
            dropout: 0.3,
            seed: 1,
            stop_below_perplexity: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.decay > 0.0) {
            return Err(Error::Usage(
                "learning rate and decay must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.window == 0 || self.batch_size == 0 {
            return Err(Error::Usage(
                "epochs, window and batch size must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Usage(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Rate for a 1-based epoch: constant through `decay_after`, then multiplied
/// by `decay` once per further epoch.
pub fn learning_rate(config: &TrainConfig, epoch: usize) -> f64 {
    let steps = epoch.saturating_sub(config.decay_after);
    config.learning_rate * config.decay.powi(steps as i32)
}

/// Dropout generator for one instance in one epoch, independent of batch
/// position and worker count.
pub fn instance_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Summed loss and summed gradients of a batch. Instances run in parallel;
/// gradients are added in ascending index order.
pub fn batch_gradients(
    model: &Model,
    examples: &[Example],
    batch: &[usize],
    config: &TrainConfig,
    epoch: usize,
) -> Result<(f64, usize, ParamGrads)> {
    let mut order = batch.to_vec();
    order.sort_unstable();
    let results: Vec<_> = order
        .par_iter()
        .map(|&i| {
            let mut rng = instance_rng(config.seed, epoch, i);
            let dropout = (config.dropout > 0.0).then_some((config.dropout, &mut rng));
            sequence_nll(model, &examples[i], config.window, true, dropout)
        })
        .collect();
    let mut loss = 0.0;
    let mut tokens = 0;
    let mut grads = ParamGrads::new(model.store.len());
    for r in results {
        let r = r?;
        loss += r.loss;
        tokens += r.tokens;
        grads.merge(r.grads.as_ref().expect("requested gradients"));
    }
    Ok((loss, tokens, grads))
}

/// Total loss and token count without dropout or gradients.
pub fn evaluate_loss(model: &Model, examples: &[Example], window: usize) -> Result<(f64, usize)> {
    let results: Vec<_> = examples
        .par_iter()
        .map(|e| sequence_nll(model, e, window, false, None))
        .collect();
    let mut loss = 0.0;
    let mut tokens = 0;
    for r in results {
        let r = r?;
        loss += r.loss;
        tokens += r.tokens;
    }
    Ok((loss, tokens))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Summed training loss over the epoch's updates.
    pub train_loss: f64,
    pub train_perplexity: f64,
    pub dev_perplexity: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose parameters scored best (dev perplexity, else train).
    pub best_epoch: usize,
    pub best_perplexity: f64,
}

fn perplexity(loss: f64, tokens: usize) -> f64 {
    (loss / tokens.max(1) as f64).exp()
}

fn metrics_csv(epochs: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,dev_ppl,lr\n");
    for m in epochs {
        let dev = m.dev_perplexity.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.epoch, m.train_loss, dev, m.learning_rate
        );
    }
    out
}

/// Trains `model` in place on `train`, selecting by perplexity on `dev`
/// (or on `train` when `dev` is empty).
///
/// With `out_dir`, the model description is saved there, parameters after
/// every epoch go to `checkpoints/epoch-NNN.ckpt`, the best ones to
/// `best.ckpt`, and the log to `metrics.csv`. On return the model holds the
/// best parameters. A numeric failure aborts; checkpoints already written
/// are kept.
pub fn train(
    model: &mut Model,
    train: &[GameInstance],
    dev: &[GameInstance],
    config: &TrainConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Usage("training split is empty".into()));
    }
    let train_examples = prepare_examples(model, train)?;
    let dev_examples = prepare_examples(model, dev)?;
    let ckpt_dir: Option<PathBuf> = out_dir.map(|d| d.join(CHECKPOINT_DIR));
    if let (Some(dir), Some(ckpt)) = (out_dir, &ckpt_dir) {
        model.save(dir)?;
        std::fs::create_dir_all(ckpt)?;
    }
    let mut order: Vec<usize> = (0..train_examples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, crate::numerics::ParamStore)> = None;
    model.store.zero_grads();
    for epoch in 1..=config.epochs {
        let lr = learning_rate(config, epoch);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0;
        for batch in order.chunks(config.batch_size) {
            let (loss, tokens, grads) =
                batch_gradients(model, &train_examples, batch, config, epoch)?;
            epoch_loss += loss;
            epoch_tokens += tokens;
            model.store.accumulate(&grads, 1.0 / batch.len() as f64);
            model.store.adagrad_step(lr);
            model.store.zero_grads();
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite training loss in epoch {epoch}"
            )));
        }
        let dev_perplexity = if dev_examples.is_empty() {
            None
        } else {
            let (loss, tokens) = evaluate_loss(model, &dev_examples, config.window)?;
            Some(perplexity(loss, tokens))
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss: epoch_loss,
            train_perplexity: perplexity(epoch_loss, epoch_tokens),
            dev_perplexity,
            learning_rate: lr,
        };
        progress(&metrics);
        let score = metrics.dev_perplexity.unwrap_or(metrics.train_perplexity);
        if let Some(dir) = &ckpt_dir {
            checkpoint::save(&model.store, &dir.join(format!("epoch-{epoch:03}.ckpt")))?;
        }
        if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
            if let Some(dir) = out_dir {
                checkpoint::save(&model.store, &dir.join(BEST_CHECKPOINT))?;
            }
            best = Some((epoch, score, model.store.clone()));
        }
        let stop = config
            .stop_below_perplexity
            .is_some_and(|t| metrics.train_perplexity < t);
        epochs.push(metrics);
        if let Some(dir) = out_dir {
            std::fs::write(dir.join(METRICS_FILE), metrics_csv(&epochs))?;
        }
        if stop {
            break;
        }
    }
    let (best_epoch, best_perplexity, store) = best.expect("at least one epoch");
    model.store = store;
    if let Some(dir) = out_dir {
        checkpoint::save(&model.store, &dir.join(crate::model::network::PARAMS_FILE))?;
    }
    Ok(TrainOutcome {
        epochs,
        best_epoch,
        best_perplexity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RecordSchema;
    use crate::data::{build_vocab, synth_games};
    use crate::fixtures::{micro_game, micro_vocabs};
    use crate::model::{ModelConfig, Variant};

    fn quiet(_: &EpochMetrics) {}

    #[test]
    fn schedule_holds_then_decays() {
        let c = TrainConfig::default();
        for e in 1..=4 {
            assert_eq!(learning_rate(&c, e), 0.15);
        }
        assert!((learning_rate(&c, 5) - 0.15 * 0.97).abs() < 1e-15);
        assert!((learning_rate(&c, 7) - 0.15 * 0.97f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                window: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                dropout: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    fn small_setup(variant: Variant) -> (Model, Vec<GameInstance>) {
        let data = synth_games(5, 6, 6, 3).unwrap();
        let vocabs = build_vocab(&data, 1);
        let config = ModelConfig::for_schema(RecordSchema::Rw4, 12, 8, variant);
        (Model::new(config, vocabs).unwrap(), data.train)
    }

    #[test]
    fn batch_gradients_ignore_instance_order_and_worker_count() {
        let (model, games) = small_setup(Variant::Gate);
        let examples = prepare_examples(&model, &games).unwrap();
        let config = TrainConfig {
            dropout: 0.3,
            window: 7,
            ..Default::default()
        };
        let (l1, t1, g1) = batch_gradients(&model, &examples, &[0, 3, 5], &config, 2).unwrap();
        let (l2, t2, g2) = batch_gradients(&model, &examples, &[5, 0, 3], &config, 2).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let (l3, _, g3) = pool
            .install(|| batch_gradients(&model, &examples, &[3, 5, 0], &config, 2))
            .unwrap();
        assert_eq!((l1, t1), (l2, t2));
        assert_eq!(l1, l3);
        for id in model.store.ids() {
            assert_eq!(g1.get(id), g2.get(id));
            assert_eq!(g1.get(id), g3.get(id));
        }
    }

    #[test]
    fn same_seed_same_run() {
        let config = TrainConfig {
            epochs: 2,
            batch_size: 2,
            window: 10,
            ..Default::default()
        };
        let run = || {
            let (mut model, games) = small_setup(Variant::Dyn);
            let out = train(
                &mut model,
                &games[..4],
                &games[4..],
                &config,
                None,
                &mut quiet,
            )
            .unwrap();
            (
                out.epochs,
                crate::numerics::checkpoint::to_string(&model.store),
            )
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(a[0].train_loss.to_bits(), b[0].train_loss.to_bits());
        assert_eq!(sa, sb);
    }

    fn overfit_setup(variant: Variant) -> (Model, GameInstance, TrainConfig) {
        let game = micro_game(RecordSchema::Rw4);
        let config = ModelConfig::for_schema(RecordSchema::Rw4, 16, 6, variant);
        let model = Model::new(config, micro_vocabs(&game)).unwrap();
        // one instance means one update per epoch: a gentler constant rate
        // avoids Adagrad's large first steps overshooting
        let train = TrainConfig {
            epochs: 200,
            batch_size: 1,
            dropout: 0.0,
            learning_rate: 0.04,
            decay: 1.0,
            ..Default::default()
        };
        (model, game, train)
    }

    #[test]
    fn one_instance_overfits() {
        let (mut model, game, config) = overfit_setup(Variant::Gate);
        let out = train(&mut model, &[game], &[], &config, None, &mut quiet).unwrap();
        let losses: Vec<f64> = out.epochs.iter().map(|m| m.train_loss).collect();
        assert!(losses[..10].windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        let last = out.epochs.last().unwrap();
        assert!(last.train_perplexity < 1.2, "{}", last.train_perplexity);
    }

    #[test]
    fn writes_checkpoints_metrics_and_best() {
        let dir = tempfile::tempdir().unwrap();
        let (mut model, games) = small_setup(Variant::Hier);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let out = train(
            &mut model,
            &games[..4],
            &games[4..],
            &config,
            Some(dir.path()),
            &mut |m| seen.push(m.epoch),
        )
        .unwrap();
        assert_eq!(seen, [1, 2, 3]);
        for e in 1..=3 {
            assert!(dir
                .path()
                .join(CHECKPOINT_DIR)
                .join(format!("epoch-{e:03}.ckpt"))
                .exists());
        }
        let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(csv.lines().next(), Some("epoch,train_loss,dev_ppl,lr"));
        assert_eq!(csv.lines().count(), 4);
        let best = crate::numerics::checkpoint::load(&dir.path().join(BEST_CHECKPOINT)).unwrap();
        let expected = crate::numerics::checkpoint::load(
            &dir.path()
                .join(CHECKPOINT_DIR)
                .join(format!("epoch-{:03}.ckpt", out.best_epoch)),
        )
        .unwrap();
        assert_eq!(
            crate::numerics::checkpoint::to_string(&best),
            crate::numerics::checkpoint::to_string(&expected)
        );
        let reloaded = Model::load(dir.path(), None).unwrap();
        assert_eq!(
            crate::numerics::checkpoint::to_string(&reloaded.store),
            crate::numerics::checkpoint::to_string(&model.store)
        );
    }

    #[test]
    fn stops_below_threshold() {
        let (mut model, game, config) = overfit_setup(Variant::Edcc);
        let config = TrainConfig {
            stop_below_perplexity: Some(1.5),
            ..config
        };
        let out = train(&mut model, &[game], &[], &config, None, &mut quiet).unwrap();
        assert!(out.epochs.len() < 200);
        assert!(out.epochs.last().unwrap().train_perplexity < 1.5);
        assert!(out.epochs[..out.epochs.len() - 1]
            .iter()
            .all(|m| m.train_perplexity >= 1.5));
    }
}
