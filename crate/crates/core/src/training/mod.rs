//! Maximum-likelihood training: Adagrad, learning-rate decay, truncated
//! backpropagation through time and checkpointing.

mod loss;
mod trainer;

pub use loss::{
    check_gradients, decoder_log_likelihood, dropout_mask, prepare_examples, sequence_loss_on_tape,
    sequence_nll, window_loss_on_tape, Example, SequenceLoss,
};
pub use trainer::{
    batch_gradients, evaluate_loss, instance_rng, learning_rate, train, EpochMetrics, TrainConfig,
    TrainOutcome, BEST_CHECKPOINT, CHECKPOINT_DIR, METRICS_FILE,
};
