//! Linear classifier heads: L2 logistic regression (the main classifier),
//! multinomial naive Bayes and a linear SVM used as TF-IDF baselines.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bow::CountRow;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{norm2, sigmoid, softplus, Features};

fn check_inputs(features: &[Features], labels: &[Label]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|l| l.is_event()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let dim = features[0].dim();
    if let Some(f) = features.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f.dim(),
        });
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub threshold: f64,
}

impl LogRegModel {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        LogRegModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            lambda,
            threshold: 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &Features) -> Result<f64> {
        Ok(x.dot(&self.weights)? + self.bias)
    }

    pub fn probability(&self, x: &Features) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Event iff the probability is strictly above the threshold.
    pub fn predict(&self, x: &Features) -> Result<(Label, f64)> {
        let p = self.probability(x)?;
        Ok((Label::from_bool(p > self.threshold), p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub lambda: f64,
    /// Stop once the gradient's max-norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lambda: 1e-4,
            tol: 1e-5,
            max_iter: 1000,
            threshold: 0.5,
        }
    }
}

/// Mean logistic loss plus `(λ/2)‖w‖²`, with the bias unregularized.
/// `params` is `[w..., b]`.
pub fn logreg_objective(features: &[Features], targets: &[f64], lambda: f64, params: &[f64]) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    let n = features.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(targets) {
        let z = x.dot(w).expect("dimension checked") + b[0];
        loss += softplus(z) - y * z;
    }
    loss / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn logreg_gradient(features: &[Features], targets: &[f64], lambda: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let (w, b) = params.split_at(d);
    let n = features.len() as f64;
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(targets) {
        let z = x.dot(w).expect("dimension checked") + b[0];
        loss += softplus(z) - y * z;
        let r = (sigmoid(z) - y) / n;
        x.axpy(r, &mut grad[..d]);
        grad[d] += r;
    }
    let mut reg = 0.0;
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        *g += lambda * wi;
        reg += wi * wi;
    }
    (loss / n + 0.5 * lambda * reg, grad)
}

/// Limited-memory BFGS with backtracking line search.
pub(crate) fn lbfgs<F>(mut fg: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 10;
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite("initial objective".into()));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    for iter in 0..max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            break;
        }
        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * s.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            dir.iter_mut().for_each(|d| *d *= sy / yy);
        } else {
            let gn = norm2(&g).max(1e-12);
            dir.iter_mut().for_each(|d| *d /= gn);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * y.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (a - beta) * si;
            }
        }
        let mut slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            history.clear();
            let gn = norm2(&g).max(1e-12);
            dir = g.iter().map(|v| -v / gn).collect();
            slope = -gn;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (ft, gt) = fg(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        if improvement.abs() <= f64::EPSILON * f.abs().max(1.0) && iter > 0 {
            break;
        }
    }
    Ok(x)
}

pub fn train_logreg(features: &[Features], labels: &[Label], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let dim = check_inputs(features, labels)?;
    if !(cfg.lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {}", cfg.lambda)));
    }
    let targets: Vec<f64> = labels.iter().map(|l| if l.is_event() { 1.0 } else { 0.0 }).collect();
    let params = lbfgs(
        |p| logreg_gradient(features, &targets, cfg.lambda, p),
        vec![0.0; dim + 1],
        cfg.tol,
        cfg.max_iter,
    )?;
    if !params.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("logistic regression parameters".into()));
    }
    let (w, b) = params.split_at(dim);
    Ok(LogRegModel {
        weights: w.to_vec(),
        bias: b[0],
        lambda: cfg.lambda,
        threshold: cfg.threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Indexed by class: 0 = Other, 1 = Event.
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

impl NaiveBayesModel {
    fn joint_log(&self, row: &CountRow) -> Result<[f64; 2]> {
        let counts = row.counts();
        if counts.dim() != self.log_likelihood[0].len() {
            return Err(Error::DimensionMismatch {
                expected: self.log_likelihood[0].len(),
                got: counts.dim(),
            });
        }
        let mut out = self.log_prior;
        for (c, o) in out.iter_mut().enumerate() {
            for &(j, f) in counts.entries() {
                *o += f * self.log_likelihood[c][j];
            }
        }
        Ok(out)
    }

    /// Posterior probability of Event.
    pub fn probability(&self, row: &CountRow) -> Result<f64> {
        let [other, event] = self.joint_log(row)?;
        Ok(sigmoid(event - other))
    }

    /// Maximum posterior; exact ties go to Other.
    pub fn predict(&self, row: &CountRow) -> Result<(Label, f64)> {
        let [other, event] = self.joint_log(row)?;
        Ok((Label::from_bool(event > other), sigmoid(event - other)))
    }
}

pub fn train_naive_bayes(rows: &[CountRow], labels: &[Label], alpha: f64) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    let feats: Vec<Features> = rows.iter().map(|r| Features::Sparse(r.counts().clone())).collect();
    let dim = check_inputs(&feats, labels)?;
    let mut totals = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (row, label) in rows.iter().zip(labels) {
        let c = label.is_event() as usize;
        docs[c] += 1;
        for &(j, f) in row.counts().entries() {
            totals[c][j] += f;
        }
    }
    let n = labels.len() as f64;
    let log_likelihood = totals.map(|t| {
        let denom = t.iter().sum::<f64>() + alpha * dim as f64;
        t.iter().map(|f| ((f + alpha) / denom).ln()).collect::<Vec<_>>()
    });
    Ok(NaiveBayesModel {
        log_prior: [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()],
        log_likelihood,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &Features) -> Result<f64> {
        Ok(x.dot(&self.weights)? + self.bias)
    }

    /// Event iff the decision value is strictly positive.
    pub fn predict(&self, x: &Features) -> Result<Label> {
        Ok(Label::from_bool(self.decision(x)? > 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            iterations: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmRun {
    pub model: LinearSvmModel,
    /// Primal objective of the averaged iterate after each iteration.
    pub objective_trace: Vec<f64>,
}

/// `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`. The bias is unregularized.
pub fn svm_objective(features: &[Features], signs: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = features
        .iter()
        .zip(signs)
        .map(|(x, y)| (1.0 - y * (x.dot(w).expect("dimension checked") + b)).max(0.0))
        .sum();
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c * hinge
}

/// Full-batch sub-gradient descent with step `1/t` and uniform averaging of
/// the iterates. The bias uses the same schedule scaled down by the number of
/// examples so that it moves at the pace of the weights.
pub fn train_linear_svm(features: &[Features], labels: &[Label], cfg: &SvmConfig) -> Result<SvmRun> {
    let dim = check_inputs(features, labels)?;
    if !(cfg.c > 0.0) || cfg.iterations == 0 {
        return Err(Error::InvalidArgument(format!(
            "need C > 0 and iterations > 0 (C {}, iterations {})",
            cfg.c, cfg.iterations
        )));
    }
    let signs: Vec<f64> = labels.iter().map(|l| if l.is_event() { 1.0 } else { -1.0 }).collect();
    let n = features.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut w_avg = vec![0.0; dim];
    let mut b_avg = 0.0;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut grad = vec![0.0; dim];
    for t in 1..=cfg.iterations {
        grad.copy_from_slice(&w);
        let mut grad_b = 0.0;
        for (x, &y) in features.iter().zip(&signs) {
            if y * (x.dot(&w)? + b) < 1.0 {
                x.axpy(-cfg.c * y, &mut grad);
                grad_b -= cfg.c * y;
            }
        }
        let eta = 1.0 / t as f64;
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= eta * gi;
        }
        b -= eta * grad_b / n;
        let k = 1.0 / t as f64;
        for (a, wi) in w_avg.iter_mut().zip(&w) {
            *a += (wi - *a) * k;
        }
        b_avg += (b - b_avg) * k;
        let obj = svm_objective(features, &signs, cfg.c, &w_avg, b_avg);
        if !obj.is_finite() {
            return Err(Error::Divergence { step: t, loss: obj });
        }
        trace.push(obj);
    }
    Ok(SvmRun {
        model: LinearSvmModel {
            weights: w_avg,
            bias: b_avg,
            c: cfg.c,
        },
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, seeded_rng, SparseVec};
    use rand::Rng as _;

    fn dense(rows: &[&[f64]]) -> Vec<Features> {
        rows.iter().map(|r| Features::Dense(r.to_vec())).collect()
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Features>, Vec<Label>) {
        let mut rng = seeded_rng(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
            // force both classes
            let y = if i < 2 { i == 0 } else { z > 0.0 };
            xs.push(Features::Dense(x));
            ys.push(Label::from_bool(y));
        }
        (xs, ys)
    }

    #[test]
    fn separable_pair_is_fit() {
        let xs = dense(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let ys = [Label::Event, Label::Other];
        let cfg = LogRegConfig { lambda: 1e-6, ..LogRegConfig::default() };
        let m = train_logreg(&xs, &ys, &cfg).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap().0, *y);
        }
    }

    #[test]
    fn weight_norm_shrinks_along_lambda_sweep() {
        let (xs, ys) = random_problem(5, 60, 8);
        let mut last = f64::INFINITY;
        for k in -4..=2 {
            let cfg = LogRegConfig {
                lambda: 10f64.powi(k),
                tol: 1e-10,
                max_iter: 5000,
                ..LogRegConfig::default()
            };
            let norm = norm2(&train_logreg(&xs, &ys, &cfg).unwrap().weights);
            assert!(norm <= last, "lambda 1e{k}: {norm} > {last}");
            last = norm;
        }
    }

    #[test]
    fn logreg_gradient_matches_finite_differences() {
        let (xs, ys) = random_problem(8, 30, 20);
        let targets: Vec<f64> = ys.iter().map(|l| l.is_event() as u8 as f64).collect();
        let mut rng = seeded_rng(1);
        let point: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = grad_check(
            |p| logreg_objective(&xs, &targets, 0.3, p),
            |p| logreg_gradient(&xs, &targets, 0.3, p).1,
            &point,
            1e-3,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn logreg_rejects_single_class_and_bad_dims() {
        let xs = dense(&[&[1.0], &[2.0]]);
        assert!(matches!(
            train_logreg(&xs, &[Label::Event, Label::Event], &LogRegConfig::default()),
            Err(Error::SingleClass)
        ));
        let ragged = dense(&[&[1.0], &[2.0, 3.0]]);
        assert!(train_logreg(&ragged, &[Label::Event, Label::Other], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn predict_tie_and_closed_form() {
        let m = LogRegModel::zeros(2, 0.0);
        let x = Features::Dense(vec![3.0, 4.0]);
        assert_eq!(m.predict(&x).unwrap(), (Label::Other, 0.5));
        let m = LogRegModel {
            weights: vec![0.0, 0.0],
            bias: 9f64.ln(),
            lambda: 0.0,
            threshold: 0.5,
        };
        let (label, p) = m.predict(&x).unwrap();
        assert_eq!(label, Label::Event);
        assert!((p - 0.9).abs() < 1e-15);
        assert!(m.predict(&Features::Dense(vec![1.0])).is_err());
    }

    #[test]
    fn predict_matches_brute_sigmoid() {
        let mut rng = seeded_rng(77);
        for _ in 0..50 {
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let m = LogRegModel { weights: w.clone(), bias: b, lambda: 0.0, threshold: 0.5 };
            let z: f64 = w.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + b;
            let brute = 1.0 / (1.0 + (-z).exp());
            let (label, p) = m.predict(&Features::Sparse(SparseVec::from_dense(&x))).unwrap();
            assert!((p - brute).abs() < 1e-12);
            assert_eq!(label.is_event(), brute > 0.5);
        }
    }

    #[test]
    fn objective_is_midpoint_convex() {
        let (xs, ys) = random_problem(21, 25, 5);
        let targets: Vec<f64> = ys.iter().map(|l| l.is_event() as u8 as f64).collect();
        let mut rng = seeded_rng(3);
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let f = |p: &[f64]| logreg_objective(&xs, &targets, 0.1, p);
            assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-12);
        }
    }

    fn counts(rows: &[&[f64]]) -> Vec<CountRow> {
        rows.iter().map(|r| CountRow(SparseVec::from_dense(r))).collect()
    }

    #[test]
    fn nb_symmetric_corpus_is_neutral() {
        let rows = counts(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let m = train_naive_bayes(&rows, &[Label::Event, Label::Other], 1.0).unwrap();
        let neutral = CountRow(SparseVec::from_dense(&[0.0, 0.0, 2.0]));
        assert!((m.probability(&neutral).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.predict(&neutral).unwrap().0, Label::Other);
        let exclusive = CountRow(SparseVec::from_dense(&[3.0, 0.0, 0.0]));
        assert_eq!(m.predict(&exclusive).unwrap().0, Label::Event);
    }

    #[test]
    fn nb_likelihoods_match_smoothed_frequencies() {
        let rows = counts(&[
            &[2.0, 0.0, 1.0, 0.0, 0.0],
            &[0.0, 1.0, 1.0, 0.0, 3.0],
            &[0.0, 0.0, 0.0, 4.0, 1.0],
        ]);
        let labels = [Label::Event, Label::Event, Label::Other];
        let m = train_naive_bayes(&rows, &labels, 1.0).unwrap();
        for (c, want_event) in [(0usize, false), (1, true)] {
            let mut tot = [0.0; 5];
            for (r, l) in rows.iter().zip(&labels) {
                if l.is_event() == want_event {
                    for (j, t) in tot.iter_mut().enumerate() {
                        *t += r.counts().get(j);
                    }
                }
            }
            let all: f64 = tot.iter().sum();
            for j in 0..5 {
                let brute = ((tot[j] + 1.0) / (all + 5.0)).ln();
                assert!((m.log_likelihood[c][j] - brute).abs() < 1e-15);
            }
            let lse = m.log_likelihood[c].iter().map(|v| v.exp()).sum::<f64>().ln();
            assert!(lse.abs() < 1e-9);
        }
        assert!((m.log_prior[1] - (2.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn nb_argmax_invariant_to_duplicating_corpus() {
        let rows = counts(&[&[2.0, 0.0, 1.0], &[0.0, 1.0, 1.0], &[1.0, 3.0, 0.0], &[0.0, 0.0, 2.0]]);
        let labels = [Label::Event, Label::Other, Label::Other, Label::Event];
        let m1 = train_naive_bayes(&rows, &labels, 1.0).unwrap();
        let mut rows2 = rows.clone();
        rows2.extend(rows.iter().cloned());
        let mut labels2 = labels.to_vec();
        labels2.extend(labels);
        let m2 = train_naive_bayes(&rows2, &labels2, 1.0).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0..4) as f64).collect();
            let row = CountRow(SparseVec::from_dense(&q));
            // brute-force posterior argmax from raw counts with add-one smoothing
            let brute = |rs: &[CountRow], ls: &[Label]| {
                let mut score = [0.0f64; 2];
                for c in 0..2 {
                    let mut tot = [0.0; 3];
                    let mut nd = 0.0;
                    for (r, l) in rs.iter().zip(ls) {
                        if l.is_event() as usize == c {
                            nd += 1.0;
                            for (j, t) in tot.iter_mut().enumerate() {
                                *t += r.counts().get(j);
                            }
                        }
                    }
                    let all: f64 = tot.iter().sum::<f64>() + 3.0;
                    score[c] = (nd / ls.len() as f64).ln()
                        + (0..3).map(|j| q[j] * ((tot[j] + 1.0) / all).ln()).sum::<f64>();
                }
                score[1] > score[0]
            };
            assert_eq!(brute(&rows, &labels), m1.predict(&row).unwrap().0.is_event());
            assert_eq!(brute(&rows2, &labels2), m2.predict(&row).unwrap().0.is_event());
        }
        assert!(train_naive_bayes(&rows, &[Label::Event; 4], 1.0).is_err());
        assert!(train_naive_bayes(&rows, &labels, 0.0).is_err());
    }

    #[test]
    fn svm_separable_pair_margins() {
        let xs = dense(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let ys = [Label::Event, Label::Other];
        let run = train_linear_svm(&xs, &ys, &SvmConfig { c: 10.0, iterations: 5000 }).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let s = if y.is_event() { 1.0 } else { -1.0 };
            let margin = s * run.model.decision(x).unwrap();
            assert!(margin >= 1.0 - 1e-3, "margin {margin}");
        }
    }

    #[test]
    fn svm_tiny_c_shrinks_weights() {
        let (xs, ys) = random_problem(2, 40, 6);
        let run = train_linear_svm(&xs, &ys, &SvmConfig { c: 1e-9, iterations: 200 }).unwrap();
        assert!(norm2(&run.model.weights) < 1e-3);
    }

    #[test]
    fn svm_averaged_objective_non_increasing() {
        let (xs, ys) = random_problem(13, 50, 6);
        let run = train_linear_svm(&xs, &ys, &SvmConfig { c: 0.5, iterations: 500 }).unwrap();
        for w in run.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn trainers_are_deterministic() {
        let (xs, ys) = random_problem(31, 40, 4);
        let a = train_logreg(&xs, &ys, &LogRegConfig::default()).unwrap();
        let b = train_logreg(&xs, &ys, &LogRegConfig::default()).unwrap();
        assert_eq!(a, b);
        let s1 = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        let s2 = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        assert_eq!(s1.model, s2.model);
    }
}
