//! Dense-matrix substrate: activations, the LSTM cell, reverse-mode tape,
//! parameter storage, gradient checks and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod matrix;
pub mod params;
pub mod tape;

pub use gradcheck::{grad_check, grad_check_against, GradCheckReport, GRAD_CHECK_EPS};
pub use lstm::{lstm_cell, lstm_step, LstmWeights};
pub use matrix::{relu, sigmoid, softmax, Matrix};
pub use params::{adagrad_update, ParamGrads, ParamId, ParamStore};
pub use tape::{Tape, Var, MASK_LOGIT};
