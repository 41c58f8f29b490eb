//! Confusion matrices, classification metrics, dev-set evaluation and the
//! seeded random hyperparameter search.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{AlertDocument, Label};
use crate::error::{Error, Result};
use crate::features::{RepresentationSelector, ViewSelector};
use crate::glove::EmbeddingTable;
use crate::numerics::{derive_seed, seeded_rng, Rng};
use crate::pipeline::{HyperParams, Pipeline};

/// Counts with Event as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn record(&mut self, gold: Label, predicted: Label) {
        match (gold, predicted) {
            (Label::Event, Label::Event) => self.tp += 1,
            (Label::Event, Label::Other) => self.fn_ += 1,
            (Label::Other, Label::Event) => self.fp += 1,
            (Label::Other, Label::Other) => self.tn += 1,
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Label)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (g, p) in pairs {
            m.record(*g, *p);
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// What was evaluated: representation, view and the hyperparameters used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    pub representation: String,
    pub view: String,
    pub hyperparams: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Set when no positive predictions were made (precision reported as 0).
    pub precision_undefined: bool,
    /// Set when there are no positive gold documents (recall reported as 0).
    pub recall_undefined: bool,
    pub matrix: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigDescriptor>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn compute_metrics(matrix: &ConfusionMatrix) -> Result<EvalReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::InvalidArgument("confusion matrix is empty".into()));
    }
    let (precision, precision_undefined) = ratio(matrix.tp, matrix.tp + matrix.fp);
    let (recall, recall_undefined) = ratio(matrix.tp, matrix.tp + matrix.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        precision,
        recall,
        f1,
        accuracy: (matrix.tp + matrix.tn) as f64 / total as f64,
        precision_undefined,
        recall_undefined,
        matrix: *matrix,
        config: None,
    })
}

/// F1 of a matrix; 0 for an empty matrix.
pub fn f1_score(matrix: &ConfusionMatrix) -> f64 {
    compute_metrics(matrix).map(|r| r.f1).unwrap_or(0.0)
}

impl EvalReport {
    pub fn with_config(mut self, config: ConfigDescriptor) -> Self {
        self.config = Some(config);
        self
    }

    /// Plain-text summary with percentages at one decimal place.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(c) = &self.config {
            let _ = writeln!(s, "representation: {}  view: {}", c.representation, c.view);
            if let Some(seed) = c.seed {
                let _ = writeln!(s, "seed: {seed}");
            }
            for (k, v) in &c.hyperparams {
                let _ = writeln!(s, "  {k} = {v}");
            }
        }
        let m = &self.matrix;
        let _ = writeln!(s, "             pred Event  pred Other");
        let _ = writeln!(s, "gold Event   {:>10}  {:>10}", m.tp, m.fn_);
        let _ = writeln!(s, "gold Other   {:>10}  {:>10}", m.fp, m.tn);
        let _ = writeln!(
            s,
            "precision {:.1}{}  recall {:.1}{}  f1 {:.1}  accuracy {:.1}",
            100.0 * self.precision,
            if self.precision_undefined { " (undefined)" } else { "" },
            100.0 * self.recall,
            if self.recall_undefined { " (undefined)" } else { "" },
            100.0 * self.f1,
            100.0 * self.accuracy
        );
        s
    }
}

/// Formats reports as a Model/Text/Prec./Rec./F-scr./Acc. table.
pub fn results_table(rows: &[(RepresentationSelector, ViewSelector, EvalReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:<6} {:>6} {:>6} {:>6} {:>6}", "Model", "Text", "Prec.", "Rec.", "F-scr.", "Acc.");
    for (rep, view, r) in rows {
        let _ = writeln!(
            s,
            "{:<6} {:<6} {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
            rep.name(),
            view.name(),
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1,
            100.0 * r.accuracy
        );
    }
    s
}

/// Evaluates a fitted pipeline against gold labels.
pub fn evaluate(model: &Pipeline, docs: &[AlertDocument]) -> Result<EvalReport> {
    let mut matrix = ConfusionMatrix::default();
    for doc in docs {
        let gold = doc.require_label()?;
        let (predicted, _) = model.predict(doc)?;
        matrix.record(gold, predicted);
    }
    Ok(compute_metrics(&matrix)?.with_config(model.descriptor()))
}

/// Inclusive bounds sampled log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub low: f64,
    pub high: f64,
}

impl LogRange {
    pub fn new(low: f64, high: f64) -> Self {
        LogRange { low, high }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.low > 0.0 && self.high >= self.low && self.high.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} range must satisfy 0 < low ≤ high, got [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        let (a, b) = (self.low.ln(), self.high.ln());
        (a + (b - a) * rng.random::<f64>()).exp()
    }
}

/// Ranges searched; unset dimensions keep the base hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lambda: Option<LogRange>,
    pub learning_rate: Option<LogRange>,
    pub hidden_sizes: Option<Vec<usize>>,
    pub batch_sizes: Option<Vec<usize>>,
}

impl SearchSpace {
    pub fn is_empty(&self) -> bool {
        self.lambda.is_none()
            && self.learning_rate.is_none()
            && self.hidden_sizes.as_ref().is_none_or(Vec::is_empty)
            && self.batch_sizes.as_ref().is_none_or(Vec::is_empty)
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptySearchSpace);
        }
        if let Some(r) = &self.lambda {
            r.validate("lambda")?;
        }
        if let Some(r) = &self.learning_rate {
            r.validate("learning_rate")?;
        }
        for (name, list) in [("hidden_sizes", &self.hidden_sizes), ("batch_sizes", &self.batch_sizes)] {
            if list.as_ref().is_some_and(|l| l.contains(&0)) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Draws one point. Every dimension consumes the generator in a fixed
    /// order so that the stream does not depend on which dimensions are set.
    pub fn sample(&self, base: &HyperParams, rng: &mut Rng) -> HyperParams {
        let mut hp = base.clone();
        if let Some(r) = &self.lambda {
            hp.lambda = r.sample(rng);
        }
        if let Some(r) = &self.learning_rate {
            hp.learning_rate = r.sample(rng);
        }
        if let Some(list) = self.hidden_sizes.as_ref().filter(|l| !l.is_empty()) {
            hp.hidden_size = list[rng.random_range(0..list.len())];
        }
        if let Some(list) = self.batch_sizes.as_ref().filter(|l| !l.is_empty()) {
            hp.batch_size = list[rng.random_range(0..list.len())];
        }
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub hyperparams: HyperParams,
    pub dev: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub representation: String,
    pub view: String,
    pub master_seed: u64,
    pub trials: Vec<Trial>,
    pub selected: usize,
}

/// Index of the best trial: highest dev F1, then accuracy, then lowest index.
pub fn select_best(trials: &[Trial]) -> Option<usize> {
    trials
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.dev
                .f1
                .total_cmp(&b.dev.f1)
                .then(a.dev.accuracy.total_cmp(&b.dev.accuracy))
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
}

pub struct SearchOutcome {
    pub log: TrialLog,
    pub best: Pipeline,
}

/// Inputs shared by every trial of a search.
pub struct SearchData<'a> {
    pub train: &'a [AlertDocument],
    pub dev: &'a [AlertDocument],
    pub embeddings: Option<Arc<EmbeddingTable>>,
}

/// Samples `budget` points, trains each on `train`, scores on `dev` and keeps
/// the best pipeline. Trial `i` trains with a seed derived from `(seed, i)`.
pub fn random_search(
    space: &SearchSpace,
    base: &HyperParams,
    budget: usize,
    data: &SearchData<'_>,
    rep: RepresentationSelector,
    view: ViewSelector,
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be ≥ 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let points: Vec<HyperParams> = (0..budget).map(|_| space.sample(base, &mut rng)).collect();
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, Pipeline)> = None;
    for (index, hp) in points.into_iter().enumerate() {
        let trial_seed = derive_seed(seed, index as u64);
        let pipeline = Pipeline::train(data.train, data.dev, rep, view, &hp, data.embeddings.clone(), trial_seed)?;
        let dev = evaluate(&pipeline, data.dev)?;
        trials.push(Trial {
            index,
            seed: trial_seed,
            hyperparams: hp,
            dev,
        });
        if select_best(&trials) == Some(index) {
            best = Some((index, pipeline));
        }
    }
    let (selected, best) = best.expect("budget ≥ 1");
    Ok(SearchOutcome {
        log: TrialLog {
            representation: rep.name().to_string(),
            view: view.name().to_string(),
            master_seed: seed,
            trials,
            selected,
        },
        best,
    })
}
