//! Multi-view classification of news alerts into active public-health events
//! and everything else.
//!
//! Each alert has two texts, a title and a description. Either text (or both,
//! concatenated description-first) is turned into a vector by one of three
//! document models: max-norm TF-IDF over unigrams and bigrams, naive Bayes
//! log-count ratios, or a bidirectional LSTM over GloVe word vectors. An
//! L2-regularized logistic regression classifies the result.

// `!(x > 0.0)` rejects NaN; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bilstm;
pub mod bow;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod glove;
pub mod linear_models;
pub mod model_file;
pub mod numerics;
pub mod pipeline;
pub mod synth;
pub mod tsne;

pub use error::{Error, Result};
