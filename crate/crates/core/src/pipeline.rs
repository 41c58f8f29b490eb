//! Training and applying one (representation, view) configuration end to end.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bilstm::{prepare_tokens, train_joint, JointExample, RnnClassifier, RnnTrainConfig, TrainLog};
use crate::bow::{count_row, fit_lcr, fit_vocabulary, CountRow};
use crate::corpus::{labels_of, tokenize, AlertDocument, Label, TokenSeq};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, ConfigDescriptor, ConfusionMatrix, EvalReport};
use crate::features::{feature_vector, BowView, FittedFeatures, RepresentationSelector, TextField, ViewSelector};
use crate::glove::EmbeddingTable;
use crate::linear_models::{
    train_linear_svm, train_logreg, train_naive_bayes, LogRegConfig, LogRegModel, SvmConfig,
};
use crate::numerics::{seeded_rng, Features};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// L2 strength of the logistic-regression head.
    pub lambda: f64,
    pub threshold: f64,
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub clip_norm: f64,
    pub input_dropout: f64,
    pub fine_tune_embeddings: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        let rnn = RnnTrainConfig::default();
        let lr = LogRegConfig::default();
        HyperParams {
            lambda: lr.lambda,
            threshold: lr.threshold,
            hidden_size: rnn.hidden_size,
            epochs: rnn.epochs,
            batch_size: rnn.batch_size,
            learning_rate: rnn.learning_rate,
            patience: rnn.patience,
            clip_norm: rnn.clip_norm,
            input_dropout: rnn.input_dropout,
            fine_tune_embeddings: rnn.fine_tune_embeddings,
            max_iter: lr.max_iter,
            tol: lr.tol,
        }
    }
}

impl HyperParams {
    pub fn logreg_config(&self) -> LogRegConfig {
        LogRegConfig {
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
            threshold: self.threshold,
        }
    }

    pub fn rnn_config(&self) -> RnnTrainConfig {
        RnnTrainConfig {
            hidden_size: self.hidden_size,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            clip_norm: self.clip_norm,
            patience: self.patience,
            input_dropout: self.input_dropout,
            fine_tune_embeddings: self.fine_tune_embeddings,
            threshold: self.threshold,
        }
    }

    /// The hyperparameters that affect the given representation.
    pub fn relevant(&self, rep: RepresentationSelector) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("lambda".into(), self.lambda);
        m.insert("threshold".into(), self.threshold);
        if rep == RepresentationSelector::Rnn {
            m.insert("hidden_size".into(), self.hidden_size as f64);
            m.insert("epochs".into(), self.epochs as f64);
            m.insert("batch_size".into(), self.batch_size as f64);
            m.insert("learning_rate".into(), self.learning_rate);
            m.insert("input_dropout".into(), self.input_dropout);
            m.insert("fine_tune_embeddings".into(), self.fine_tune_embeddings as u8 as f64);
        }
        m
    }
}

/// A trained configuration: fitted document models plus the classifier head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pipeline {
    pub representation: RepresentationSelector,
    pub view: ViewSelector,
    pub features: FittedFeatures,
    pub head: LogRegModel,
    pub hyperparams: HyperParams,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_checksum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_log: Option<TrainLog>,
}

fn field_tokens(docs: &[AlertDocument], field: TextField) -> Vec<TokenSeq> {
    docs.iter().map(|d| tokenize(field.text(d))).collect()
}

fn joint_examples(docs: &[AlertDocument], view: ViewSelector) -> Result<Vec<JointExample>> {
    docs.iter()
        .map(|d| {
            Ok(JointExample {
                views: view
                    .fields()
                    .iter()
                    .map(|f| prepare_tokens(tokenize(f.text(d))))
                    .collect(),
                label: d.require_label()?,
            })
        })
        .collect()
}

impl Pipeline {
    /// Trains on `train`; `dev` drives early stopping for the RNN model.
    pub fn train(
        train: &[AlertDocument],
        dev: &[AlertDocument],
        rep: RepresentationSelector,
        view: ViewSelector,
        hp: &HyperParams,
        embeddings: Option<Arc<EmbeddingTable>>,
        seed: u64,
    ) -> Result<Pipeline> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let labels = labels_of(train)?;
        labels_of(dev)?;
        let mut fitted = FittedFeatures::default();
        let mut checksum = None;
        let mut train_log = None;
        let head = match rep {
            RepresentationSelector::Tf | RepresentationSelector::Lcr => {
                for &field in view.fields() {
                    let tokens = field_tokens(train, field);
                    let vocab = fit_vocabulary(&tokens)?;
                    let lcr = if rep == RepresentationSelector::Lcr {
                        let rows: Vec<CountRow> = tokens.iter().map(|t| count_row(t, &vocab)).collect();
                        Some(fit_lcr(&rows, &labels)?)
                    } else {
                        None
                    };
                    fitted.bow.insert(field, BowView { vocab, lcr });
                }
                let feats = train
                    .iter()
                    .map(|d| feature_vector(d, rep, view, &fitted))
                    .collect::<Result<Vec<_>>>()?;
                train_logreg(&feats, &labels, &hp.logreg_config())?
            }
            RepresentationSelector::Rnn => {
                let emb = embeddings.ok_or_else(|| Error::MissingComponent("embeddings".into()))?;
                let cfg = hp.rnn_config();
                let mut rng = seeded_rng(seed);
                let model = RnnClassifier::init(emb.dim(), view.fields().len(), &cfg, &mut rng);
                let run = train_joint(
                    model,
                    &emb,
                    &joint_examples(train, view)?,
                    &joint_examples(dev, view)?,
                    &cfg,
                    &mut rng,
                )?;
                let emb = match run.embeddings {
                    Some(tuned) => Arc::new(tuned),
                    None => emb,
                };
                checksum = Some(emb.checksum());
                fitted.embeddings = Some(emb);
                for (&field, enc) in view.fields().iter().zip(run.model.encoders) {
                    fitted.encoders.insert(field, enc);
                }
                train_log = Some(run.log);
                run.model.head
            }
        };
        Ok(Pipeline {
            representation: rep,
            view,
            features: fitted,
            head,
            hyperparams: hp.clone(),
            seed,
            embedding_checksum: checksum,
            train_log,
        })
    }

    pub fn feature_vector(&self, doc: &AlertDocument) -> Result<Features> {
        feature_vector(doc, self.representation, self.view, &self.features)
    }

    pub fn predict(&self, doc: &AlertDocument) -> Result<(Label, f64)> {
        self.head.predict(&self.feature_vector(doc)?)
    }

    pub fn embeddings(&self) -> Option<&Arc<EmbeddingTable>> {
        self.features.embeddings.as_ref()
    }

    /// Attaches the embedding table after loading, verifying its checksum.
    pub fn attach_embeddings(&mut self, table: Arc<EmbeddingTable>) -> Result<()> {
        if let Some(expected) = &self.embedding_checksum {
            let found = table.checksum();
            if &found != expected {
                return Err(Error::EmbeddingMismatch {
                    expected: expected.clone(),
                    found,
                });
            }
        }
        self.features.embeddings = Some(table);
        Ok(())
    }

    pub fn needs_embeddings(&self) -> bool {
        self.representation == RepresentationSelector::Rnn
    }

    pub fn descriptor(&self) -> ConfigDescriptor {
        ConfigDescriptor {
            representation: self.representation.name().to_string(),
            view: self.view.name().to_string(),
            hyperparams: self.hyperparams.relevant(self.representation),
            seed: Some(self.seed),
        }
    }
}

/// The TF-IDF classifier family compared against logistic regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    LogisticRegression,
    NaiveBayes,
    LinearSvm,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::LogisticRegression,
        BaselineKind::NaiveBayes,
        BaselineKind::LinearSvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::LogisticRegression => "logistic_regression",
            BaselineKind::NaiveBayes => "naive_bayes",
            BaselineKind::LinearSvm => "linear_svm",
        }
    }

    /// Input each classifier consumes.
    pub fn input(self) -> &'static str {
        match self {
            BaselineKind::NaiveBayes => "raw n-gram counts",
            _ => "tf-idf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub classifier: BaselineKind,
    pub input: String,
    pub report: EvalReport,
}

/// Trains logistic regression, naive Bayes and a linear SVM on the bag-of-
/// n-grams features of `view` and scores each on `eval_docs`. Naive Bayes
/// consumes counts; the others consume TF-IDF.
pub fn tfidf_classifier_sweep(
    train: &[AlertDocument],
    eval_docs: &[AlertDocument],
    view: ViewSelector,
    hp: &HyperParams,
    svm_c: f64,
    nb_alpha: f64,
) -> Result<Vec<BaselineResult>> {
    let labels = labels_of(train)?;
    let gold = labels_of(eval_docs)?;
    let mut fitted = FittedFeatures::default();
    for &field in view.fields() {
        let vocab = fit_vocabulary(&field_tokens(train, field))?;
        fitted.bow.insert(field, BowView { vocab, lcr: None });
    }
    let rep = RepresentationSelector::Tf;
    let tf = |docs: &[AlertDocument]| -> Result<Vec<Features>> {
        docs.iter().map(|d| feature_vector(d, rep, view, &fitted)).collect()
    };
    let counts = |docs: &[AlertDocument]| -> Vec<CountRow> {
        docs.iter()
            .map(|d| {
                let mut row: Option<crate::numerics::SparseVec> = None;
                for &field in view.fields() {
                    let vocab = &fitted.bow[&field].vocab;
                    let r = count_row(&tokenize(field.text(d)), vocab).0;
                    row = Some(match row {
                        Some(acc) => acc.concat(&r),
                        None => r,
                    });
                }
                CountRow(row.expect("every view has a field"))
            })
            .collect()
    };
    let (train_tf, eval_tf) = (tf(train)?, tf(eval_docs)?);
    let score = |pred: Vec<Label>| -> Result<EvalReport> {
        compute_metrics(&ConfusionMatrix::from_pairs(gold.iter().zip(&pred)))
    };
    let mut out = Vec::new();
    for kind in BaselineKind::ALL {
        let predictions: Vec<Label> = match kind {
            BaselineKind::LogisticRegression => {
                let m = train_logreg(&train_tf, &labels, &hp.logreg_config())?;
                eval_tf.iter().map(|x| m.predict(x).map(|p| p.0)).collect::<Result<_>>()?
            }
            BaselineKind::NaiveBayes => {
                let m = train_naive_bayes(&counts(train), &labels, nb_alpha)?;
                counts(eval_docs).iter().map(|r| m.predict(r).map(|p| p.0)).collect::<Result<_>>()?
            }
            BaselineKind::LinearSvm => {
                let cfg = SvmConfig { c: svm_c, ..SvmConfig::default() };
                let m = train_linear_svm(&train_tf, &labels, &cfg)?.model;
                eval_tf.iter().map(|x| m.predict(x)).collect::<Result<_>>()?
            }
        };
        let mut hyper = BTreeMap::new();
        match kind {
            BaselineKind::LogisticRegression => hyper.insert("lambda".to_string(), hp.lambda),
            BaselineKind::NaiveBayes => hyper.insert("alpha".to_string(), nb_alpha),
            BaselineKind::LinearSvm => hyper.insert("c".to_string(), svm_c),
        };
        let report = score(predictions)?.with_config(ConfigDescriptor {
            representation: format!("tf/{}", kind.name()),
            view: view.name().to_string(),
            hyperparams: hyper,
            seed: None,
        });
        out.push(BaselineResult {
            classifier: kind,
            input: kind.input().to_string(),
            report,
        });
    }
    Ok(out)
}
