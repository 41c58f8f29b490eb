//! Bidirectional LSTM document model with manual backpropagation.

mod cell;
mod encoder;
mod joint;

pub use cell::{lstm_step, lstm_step_backward, LstmParams, StepGrads, FORGET_BIAS, INIT_SCALE};
pub use encoder::{BiLstmEncoder, DocVector};
pub use joint::{prepare_tokens, train_joint, JointExample, JointRun, RnnClassifier, RnnTrainConfig, TrainLog};
