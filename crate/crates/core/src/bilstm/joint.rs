//! Joint training of one or two BiLSTM encoders with a logistic-regression
//! head over their concatenated document vectors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::BiLstmEncoder;
use crate::corpus::{Label, TokenSeq};
use crate::error::{Error, Result};
use crate::eval::{f1_score, ConfusionMatrix};
use crate::glove::{EmbeddingTable, UNK_TOKEN};
use crate::linear_models::LogRegModel;
use crate::numerics::{sigmoid, softplus, Rng};

/// Documents are processed in fixed-size groups whose gradients are summed in
/// order, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnTrainConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub clip_norm: f64,
    /// Epochs without dev-F1 improvement before stopping.
    pub patience: usize,
    pub input_dropout: f64,
    pub fine_tune_embeddings: bool,
    pub threshold: f64,
}

impl Default for RnnTrainConfig {
    fn default() -> Self {
        RnnTrainConfig {
            hidden_size: 128,
            epochs: 20,
            batch_size: 32,
            learning_rate: 5e-3,
            lambda: 1e-4,
            clip_norm: 5.0,
            patience: 5,
            input_dropout: 0.0,
            fine_tune_embeddings: false,
            threshold: 0.5,
        }
    }
}

/// One labeled document split into the texts fed to each encoder.
#[derive(Debug, Clone)]
pub struct JointExample {
    pub views: Vec<TokenSeq>,
    pub label: Label,
}

/// Empty texts become a single unknown token so every text has a vector.
pub fn prepare_tokens(tokens: TokenSeq) -> TokenSeq {
    if tokens.is_empty() {
        TokenSeq(vec![UNK_TOKEN.to_string()])
    } else {
        tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnClassifier {
    pub encoders: Vec<BiLstmEncoder>,
    pub head: LogRegModel,
}

/// Gradients for every trainable tensor.
struct Grads {
    encoders: Vec<BiLstmEncoder>,
    head_w: Vec<f64>,
    head_b: f64,
    embeddings: BTreeMap<usize, Vec<f64>>,
    loss_sum: f64,
}

impl Grads {
    fn zeros_like(model: &RnnClassifier) -> Self {
        Grads {
            encoders: model
                .encoders
                .iter()
                .map(|e| BiLstmEncoder::zeros(e.hidden(), e.input()))
                .collect(),
            head_w: vec![0.0; model.head.dim()],
            head_b: 0.0,
            embeddings: BTreeMap::new(),
            loss_sum: 0.0,
        }
    }

    fn add(&mut self, other: Grads) {
        for (a, b) in self.encoders.iter_mut().zip(&other.encoders) {
            for (da, db) in [(&mut a.forward, &b.forward), (&mut a.backward, &b.backward)] {
                for (sa, sb) in da.slices_mut().into_iter().zip(db.slices()) {
                    for (x, y) in sa.iter_mut().zip(sb) {
                        *x += y;
                    }
                }
            }
        }
        for (x, y) in self.head_w.iter_mut().zip(&other.head_w) {
            *x += y;
        }
        self.head_b += other.head_b;
        for (i, g) in other.embeddings {
            match self.embeddings.get_mut(&i) {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(x, y)| *x += y),
                None => {
                    self.embeddings.insert(i, g);
                }
            }
        }
        self.loss_sum += other.loss_sum;
    }

    fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.encoders {
            for p in [&e.forward, &e.backward] {
                for s in p.slices() {
                    out.extend_from_slice(s);
                }
            }
        }
        out.extend_from_slice(&self.head_w);
        out.push(self.head_b);
        out
    }
}

/// Per-document options used only during training.
#[derive(Clone, Copy)]
struct TrainingNoise {
    dropout: f64,
    seed: u64,
}

impl RnnClassifier {
    pub fn init(input_dim: usize, num_views: usize, cfg: &RnnTrainConfig, rng: &mut Rng) -> Self {
        let encoders: Vec<BiLstmEncoder> = (0..num_views)
            .map(|_| BiLstmEncoder::init(cfg.hidden_size, input_dim, rng))
            .collect();
        let dim = encoders.iter().map(BiLstmEncoder::output_dim).sum();
        let mut head = LogRegModel::zeros(dim, cfg.lambda);
        head.threshold = cfg.threshold;
        RnnClassifier { encoders, head }
    }

    pub fn num_params(&self) -> usize {
        self.encoders.iter().map(BiLstmEncoder::num_params).sum::<usize>() + self.head.dim() + 1
    }

    /// Concatenated document vectors, one block per encoder.
    pub fn features(&self, embeddings: &EmbeddingTable, views: &[TokenSeq]) -> Result<Vec<f64>> {
        if views.len() != self.encoders.len() {
            return Err(Error::DimensionMismatch {
                expected: self.encoders.len(),
                got: views.len(),
            });
        }
        let mut out = Vec::with_capacity(self.head.dim());
        for (enc, tokens) in self.encoders.iter().zip(views) {
            out.extend(enc.encode(embeddings, tokens)?.0);
        }
        Ok(out)
    }

    pub fn probability(&self, embeddings: &EmbeddingTable, views: &[TokenSeq]) -> Result<f64> {
        let f = self.features(embeddings, views)?;
        let z: f64 = f.iter().zip(&self.head.weights).map(|(a, b)| a * b).sum::<f64>() + self.head.bias;
        Ok(sigmoid(z))
    }

    pub fn predict(&self, embeddings: &EmbeddingTable, views: &[TokenSeq]) -> Result<(Label, f64)> {
        let p = self.probability(embeddings, views)?;
        Ok((Label::from_bool(p > self.head.threshold), p))
    }

    /// All encoder parameters (forward then backward, per encoder), then the
    /// head weights and bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for e in &self.encoders {
            for p in [&e.forward, &e.backward] {
                for s in p.slices() {
                    out.extend_from_slice(s);
                }
            }
        }
        out.extend_from_slice(&self.head.weights);
        out.push(self.head.bias);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for e in &mut self.encoders {
            for p in [&mut e.forward, &mut e.backward] {
                for s in p.slices_mut() {
                    let n = s.len();
                    s.copy_from_slice(&flat[off..off + n]);
                    off += n;
                }
            }
        }
        let d = self.head.dim();
        self.head.weights.copy_from_slice(&flat[off..off + d]);
        self.head.bias = flat[off + d];
        Ok(())
    }

    fn example_grads(
        &self,
        embeddings: &EmbeddingTable,
        example: &JointExample,
        scale: f64,
        fine_tune: bool,
        noise: Option<TrainingNoise>,
        grads: &mut Grads,
    ) -> Result<()> {
        let mut caches = Vec::with_capacity(self.encoders.len());
        let mut inputs = Vec::with_capacity(self.encoders.len());
        let mut features = Vec::with_capacity(self.head.dim());
        let mut noise_rng = noise.map(|n| Rng::seed_from_u64(n.seed));
        for (enc, tokens) in self.encoders.iter().zip(&example.views) {
            let mut xs: Vec<Vec<f64>> = tokens.iter().map(|t| embeddings.vector(t).to_vec()).collect();
            let mut masks = None;
            if let (Some(n), Some(rng)) = (noise, noise_rng.as_mut()) {
                if n.dropout > 0.0 {
                    let keep = 1.0 / (1.0 - n.dropout);
                    let m: Vec<Vec<f64>> = xs
                        .iter_mut()
                        .map(|x| {
                            x.iter_mut()
                                .map(|v| {
                                    let s = if rng.random::<f64>() < n.dropout { 0.0 } else { keep };
                                    *v *= s;
                                    s
                                })
                                .collect()
                        })
                        .collect();
                    masks = Some(m);
                }
            }
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            let (dv, cache) = enc.forward_cached(&refs)?;
            features.extend(dv.0);
            caches.push(cache);
            inputs.push(masks);
        }
        let y = if example.label.is_event() { 1.0 } else { 0.0 };
        let z: f64 = features.iter().zip(&self.head.weights).map(|(a, b)| a * b).sum::<f64>() + self.head.bias;
        grads.loss_sum += softplus(z) - y * z;
        let dz = (sigmoid(z) - y) * scale;
        for (g, f) in grads.head_w.iter_mut().zip(&features) {
            *g += dz * f;
        }
        grads.head_b += dz;
        let mut off = 0;
        for (v, enc) in self.encoders.iter().enumerate() {
            let n = enc.output_dim();
            let d_out: Vec<f64> = self.head.weights[off..off + n].iter().map(|w| dz * w).collect();
            off += n;
            let dxs = enc.backward(&caches[v], &d_out, &mut grads.encoders[v]);
            if fine_tune {
                for (t, (tok, mut dx)) in example.views[v].iter().zip(dxs).enumerate() {
                    let Some(i) = embeddings.index_of(tok) else { continue };
                    if let Some(masks) = &inputs[v] {
                        dx.iter_mut().zip(&masks[t]).for_each(|(g, m)| *g *= m);
                    }
                    match grads.embeddings.get_mut(&i) {
                        Some(acc) => acc.iter_mut().zip(&dx).for_each(|(a, b)| *a += b),
                        None => {
                            grads.embeddings.insert(i, dx);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn batch_grads(
        &self,
        embeddings: &EmbeddingTable,
        batch: &[&JointExample],
        fine_tune: bool,
        noise: Option<(f64, &[u64])>,
    ) -> Result<Grads> {
        let scale = 1.0 / batch.len() as f64;
        let partials: Vec<Result<Grads>> = batch
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut g = Grads::zeros_like(self);
                for (i, ex) in chunk.iter().enumerate() {
                    let n = noise.map(|(p, seeds)| TrainingNoise {
                        dropout: p,
                        seed: seeds[c * GRAD_CHUNK + i],
                    });
                    self.example_grads(embeddings, ex, scale, fine_tune, n, &mut g)?;
                }
                Ok(g)
            })
            .collect();
        let mut total = Grads::zeros_like(self);
        for p in partials {
            total.add(p?);
        }
        let mut reg = 0.0;
        for (g, w) in total.head_w.iter_mut().zip(&self.head.weights) {
            *g += self.head.lambda * w;
            reg += w * w;
        }
        total.loss_sum = total.loss_sum * scale + 0.5 * self.head.lambda * reg;
        Ok(total)
    }

    /// Mean logistic loss over `examples` plus `(λ/2)‖w‖²`.
    pub fn objective(&self, embeddings: &EmbeddingTable, examples: &[JointExample]) -> Result<f64> {
        let refs: Vec<&JointExample> = examples.iter().collect();
        Ok(self.batch_grads(embeddings, &refs, false, None)?.loss_sum)
    }

    /// Objective and its gradient in [`flat_params`](Self::flat_params) order.
    pub fn loss_and_grad(&self, embeddings: &EmbeddingTable, examples: &[JointExample]) -> Result<(f64, Vec<f64>)> {
        let refs: Vec<&JointExample> = examples.iter().collect();
        let g = self.batch_grads(embeddings, &refs, false, None)?;
        Ok((g.loss_sum, g.flat()))
    }

    /// Gradient with respect to the rows of the embedding table touched by
    /// `examples`.
    pub fn embedding_grad(
        &self,
        embeddings: &EmbeddingTable,
        examples: &[JointExample],
    ) -> Result<BTreeMap<usize, Vec<f64>>> {
        let refs: Vec<&JointExample> = examples.iter().collect();
        Ok(self.batch_grads(embeddings, &refs, true, None)?.embeddings)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Adam moments for embedding rows, updated only where gradients exist.
struct LazyAdam {
    dim: usize,
    state: BTreeMap<usize, (Vec<f64>, Vec<f64>, u64)>,
}

impl LazyAdam {
    fn step(&mut self, table: &mut EmbeddingTable, grads: &BTreeMap<usize, Vec<f64>>, scale: f64, lr: f64) {
        for (&i, g) in grads {
            let (m, v, t) = self
                .state
                .entry(i)
                .or_insert_with(|| (vec![0.0; self.dim], vec![0.0; self.dim], 0));
            *t += 1;
            let c1 = 1.0 - BETA1.powi(*t as i32);
            let c2 = 1.0 - BETA2.powi(*t as i32);
            let row = table.row_mut(i);
            for k in 0..self.dim {
                let gk = g[k] * scale;
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * gk;
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * gk * gk;
                row[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean training objective over each epoch's batches.
    pub epoch_loss: Vec<f64>,
    pub dev_f1: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: usize,
    pub steps: usize,
}

pub struct JointRun {
    pub model: RnnClassifier,
    /// Present when embeddings were fine-tuned.
    pub embeddings: Option<EmbeddingTable>,
    pub log: TrainLog,
}

fn dev_f1(model: &RnnClassifier, embeddings: &EmbeddingTable, dev: &[JointExample]) -> Result<f64> {
    let preds: Vec<Result<Label>> = dev
        .par_iter()
        .map(|ex| model.predict(embeddings, &ex.views).map(|(l, _)| l))
        .collect();
    let mut m = ConfusionMatrix::default();
    for (ex, p) in dev.iter().zip(preds) {
        m.record(ex.label, p?);
    }
    Ok(f1_score(&m))
}

/// Mini-batch Adam with global gradient-norm clipping and early stopping on
/// dev F1. Returns the parameters from the best dev epoch (the last epoch
/// when `dev` is empty).
pub fn train_joint(
    mut model: RnnClassifier,
    embeddings: &EmbeddingTable,
    train: &[JointExample],
    dev: &[JointExample],
    cfg: &RnnTrainConfig,
    rng: &mut Rng,
) -> Result<JointRun> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pos = train.iter().filter(|e| e.label.is_event()).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::SingleClass);
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("batch size and epochs must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.input_dropout) {
        return Err(Error::InvalidArgument(format!("input dropout must be in [0, 1), got {}", cfg.input_dropout)));
    }
    if let Some(ex) = train.iter().chain(dev).find(|e| e.views.len() != model.encoders.len()) {
        return Err(Error::DimensionMismatch {
            expected: model.encoders.len(),
            got: ex.views.len(),
        });
    }
    let mut tuned = cfg.fine_tune_embeddings.then(|| embeddings.clone());
    let mut params = model.flat_params();
    let mut adam = Adam::new(params.len());
    let mut lazy = LazyAdam {
        dim: embeddings.dim(),
        state: BTreeMap::new(),
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Vec<f64>, Option<EmbeddingTable>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&JointExample> = idx.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = (0..batch.len()).map(|_| rng.random()).collect();
            let noise = (cfg.input_dropout > 0.0).then_some((cfg.input_dropout, seeds.as_slice()));
            let table = tuned.as_ref().unwrap_or(embeddings);
            let g = model.batch_grads(table, &batch, cfg.fine_tune_embeddings, noise)?;
            log.steps += 1;
            if !g.loss_sum.is_finite() {
                return Err(Error::Divergence {
                    step: log.steps,
                    loss: g.loss_sum,
                });
            }
            epoch_loss += g.loss_sum;
            batches += 1;
            let mut flat = g.flat();
            let sq: f64 = flat.iter().map(|v| v * v).sum::<f64>()
                + g.embeddings.values().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>();
            let norm = sq.sqrt();
            let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            if scale != 1.0 {
                flat.iter_mut().for_each(|v| *v *= scale);
            }
            adam.step(&mut params, &flat, cfg.learning_rate);
            model.set_flat_params(&params)?;
            if let Some(table) = tuned.as_mut() {
                lazy.step(table, &g.embeddings, scale, cfg.learning_rate);
            }
        }
        log.epoch_loss.push(epoch_loss / batches as f64);
        if !params.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step: log.steps,
                loss: f64::NAN,
            });
        }
        if dev.is_empty() {
            log.best_epoch = epoch;
            continue;
        }
        let f1 = dev_f1(&model, tuned.as_ref().unwrap_or(embeddings), dev)?;
        log.dev_f1.push(f1);
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, params.clone(), tuned.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, p, t)) = best {
        model.set_flat_params(&p)?;
        tuned = t;
    }
    Ok(JointRun {
        model,
        embeddings: tuned,
        log,
    })
}
