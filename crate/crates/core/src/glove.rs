//! Word vectors trained with the GloVe weighted least-squares objective.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::numerics::{DenseMat, Rng};

/// Largest supported context window. Weights `1/offset` are accumulated as
/// exact integer multiples of `1 / lcm(1..=window)`, which must fit in u128.
pub const MAX_WINDOW: usize = 40;

pub const UNK_TOKEN: &str = "<unk>";

/// Symmetric co-occurrence counts over a sorted word list.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    words: Vec<String>,
    /// (i, j, X_ij) sorted by (i, j); both triangles and the diagonal stored.
    entries: Vec<(u32, u32, f64)>,
}

impl CooccurrenceTable {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> f64 {
        let (Ok(i), Ok(j)) = (
            self.words.binary_search_by(|w| w.as_str().cmp(a)),
            self.words.binary_search_by(|w| w.as_str().cmp(b)),
        ) else {
            return 0.0;
        };
        match self
            .entries
            .binary_search_by_key(&(i as u32, j as u32), |&(x, y, _)| (x, y))
        {
            Ok(pos) => self.entries[pos].2,
            Err(_) => 0.0,
        }
    }
}

fn lcm_upto(n: usize) -> u128 {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=n as u128).fold(1, |acc, k| acc / gcd(acc, k) * k)
}

/// Adds `1/offset` to `X[a][b]` and `X[b][a]` for every token pair at most
/// `window` apart. Words are indexed in sorted order and weights accumulate
/// exactly, so the table does not depend on document order.
pub fn build_cooccurrence(docs: &[TokenSeq], window: usize) -> Result<CooccurrenceTable> {
    if window == 0 || window > MAX_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "window must be in 1..={MAX_WINDOW}, got {window}"
        )));
    }
    let words: Vec<String> = docs
        .iter()
        .flat_map(|d| d.iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, u32> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32))
        .collect();
    let scale = lcm_upto(window);
    let mut acc: HashMap<(u32, u32), u128> = HashMap::new();
    for doc in docs {
        let ids: Vec<u32> = doc.iter().map(|t| index[t]).collect();
        for (pos, &a) in ids.iter().enumerate() {
            for offset in 1..=window {
                let Some(&b) = ids.get(pos + offset) else {
                    break;
                };
                let w = scale / offset as u128;
                *acc.entry((a, b)).or_default() += w;
                *acc.entry((b, a)).or_default() += w;
            }
        }
    }
    let mut entries: Vec<(u32, u32, f64)> = acc
        .into_iter()
        .map(|((i, j), v)| (i, j, v as f64 / scale as f64))
        .collect();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    Ok(CooccurrenceTable { words, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 256,
            epochs: 15,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
        }
    }
}

#[inline]
fn weight(x: f64, cfg: &GloveConfig) -> f64 {
    if x < cfg.x_max {
        (x / cfg.x_max).powf(cfg.alpha)
    } else {
        1.0
    }
}

/// Word vectors plus the fallback used for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: DenseMat,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table; the unknown-word vector is the mean of all vectors.
    pub fn new(words: Vec<String>, vectors: DenseMat) -> Result<Self> {
        let unk = mean_rows(&vectors);
        Self::with_unk(words, vectors, unk)
    }

    pub fn with_unk(words: Vec<String>, vectors: DenseMat, unk: Vec<f64>) -> Result<Self> {
        if words.len() != vectors.rows {
            return Err(Error::DimensionMismatch {
                expected: vectors.rows,
                got: words.len(),
            });
        }
        if unk.len() != vectors.cols {
            return Err(Error::DimensionMismatch {
                expected: vectors.cols,
                got: unk.len(),
            });
        }
        if !vectors.values.iter().chain(&unk).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding vector".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate embedding word \"{w}\"")));
            }
        }
        Ok(EmbeddingTable {
            words,
            index,
            vectors,
            unk,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.vectors.row_mut(i)
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    pub fn vector(&self, word: &str) -> &[f64] {
        match self.index_of(word) {
            Some(i) => self.vectors.row(i),
            None => &self.unk,
        }
    }

    /// SHA-256 over words and the exact bit patterns of every value.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for (i, w) in self.words.iter().enumerate() {
            h.update((w.len() as u64).to_le_bytes());
            h.update(w.as_bytes());
            for v in self.vectors.row(i) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for v in &self.unk {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// `word v1 ... vdim` per line; the unknown-word vector is written last
    /// under [`UNK_TOKEN`]. Values use shortest round-trip formatting.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = String::new();
        let rows = self
            .words
            .iter()
            .enumerate()
            .map(|(i, word)| (word.as_str(), self.vectors.row(i)))
            .chain(std::iter::once((UNK_TOKEN, self.unk.as_slice())));
        for (word, values) in rows {
            line.clear();
            line.push_str(word);
            for v in values {
                line.push(' ');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the text format, including files produced by other tools. A
    /// `<unk>` row, when present, becomes the unknown-word vector.
    pub fn read_text(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut values = Vec::new();
        let mut unk = None;
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let row: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {d} values, found {}", row.len()),
                    })
                }
                _ => {}
            }
            if row.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "no vector values".into(),
                });
            }
            if word == UNK_TOKEN {
                unk = Some(row);
            } else {
                words.push(word.to_string());
                values.extend(row);
            }
        }
        let dim = dim.ok_or(Error::EmptyCorpus)?;
        let vectors = DenseMat::from_vec(words.len(), dim, values)?;
        match unk {
            Some(u) => Self::with_unk(words, vectors, u),
            None => Self::new(words, vectors),
        }
    }
}

fn mean_rows(m: &DenseMat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    if m.rows == 0 {
        return out;
    }
    for r in 0..m.rows {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    let n = m.rows as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Parameters of the GloVe model during training.
struct GloveParams {
    w: DenseMat,
    w_ctx: DenseMat,
    b: Vec<f64>,
    b_ctx: Vec<f64>,
}

impl GloveParams {
    fn objective(&self, table: &CooccurrenceTable, cfg: &GloveConfig) -> f64 {
        let mut total = 0.0;
        for &(i, j, x) in &table.entries {
            let (i, j) = (i as usize, j as usize);
            let diff = self.prediction(i, j) - x.ln();
            total += weight(x, cfg) * diff * diff;
        }
        total
    }

    fn prediction(&self, i: usize, j: usize) -> f64 {
        let dot: f64 = self.w.row(i).iter().zip(self.w_ctx.row(j)).map(|(a, b)| a * b).sum();
        dot + self.b[i] + self.b_ctx[j]
    }
}

#[derive(Debug, Clone)]
pub struct GloveRun {
    pub table: EmbeddingTable,
    /// Objective at initialization followed by its value after each epoch.
    pub objective_trace: Vec<f64>,
}

/// Minimizes `Σ f(X_ij)(w_i·w̃_j + b_i + b̃_j − ln X_ij)²` with AdaGrad.
/// The returned vector for word i is `w_i + w̃_i`.
pub fn train_glove(table: &CooccurrenceTable, cfg: &GloveConfig, rng: &mut Rng) -> Result<GloveRun> {
    if cfg.dim == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument(format!(
            "dim and epochs must be positive (dim {}, epochs {})",
            cfg.dim, cfg.epochs
        )));
    }
    if table.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = table.words.len();
    let d = cfg.dim;
    let init = |rng: &mut Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| (rng.random::<f64>() - 0.5) / d as f64).collect()
    };
    let mut p = GloveParams {
        w: DenseMat::from_vec(n, d, init(rng, n * d))?,
        w_ctx: DenseMat::from_vec(n, d, init(rng, n * d))?,
        b: init(rng, n),
        b_ctx: init(rng, n),
    };
    // AdaGrad accumulators start at 1 as in the reference implementation
    let mut gw = DenseMat::from_vec(n, d, vec![1.0; n * d])?;
    let mut gw_ctx = gw.clone();
    let mut gb = vec![1.0f64; n];
    let mut gb_ctx = vec![1.0f64; n];

    let mut trace = vec![p.objective(table, cfg)];
    let mut order: Vec<usize> = (0..table.entries.len()).collect();
    let lr = cfg.learning_rate;
    let mut grad_w = vec![0.0; d];
    let mut grad_c = vec![0.0; d];
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for &e in &order {
            let (i, j, x) = table.entries[e];
            let (i, j) = (i as usize, j as usize);
            let diff = p.prediction(i, j) - x.ln();
            let fdiff = 2.0 * weight(x, cfg) * diff;
            if !fdiff.is_finite() {
                return Err(Error::Divergence {
                    step: epoch,
                    loss: fdiff,
                });
            }
            for k in 0..d {
                grad_w[k] = fdiff * p.w_ctx.get(j, k);
                grad_c[k] = fdiff * p.w.get(i, k);
            }
            let (wr, gwr) = (p.w.row_mut(i), gw.row_mut(i));
            for k in 0..d {
                wr[k] -= lr * grad_w[k] / gwr[k].sqrt();
                gwr[k] += grad_w[k] * grad_w[k];
            }
            let (cr, gcr) = (p.w_ctx.row_mut(j), gw_ctx.row_mut(j));
            for k in 0..d {
                cr[k] -= lr * grad_c[k] / gcr[k].sqrt();
                gcr[k] += grad_c[k] * grad_c[k];
            }
            p.b[i] -= lr * fdiff / gb[i].sqrt();
            gb[i] += fdiff * fdiff;
            p.b_ctx[j] -= lr * fdiff / gb_ctx[j].sqrt();
            gb_ctx[j] += fdiff * fdiff;
        }
        let obj = p.objective(table, cfg);
        if !obj.is_finite() {
            return Err(Error::Divergence {
                step: epoch,
                loss: obj,
            });
        }
        trace.push(obj);
    }

    let mut vectors = p.w;
    for (v, c) in vectors.values.iter_mut().zip(&p.w_ctx.values) {
        *v += c;
    }
    Ok(GloveRun {
        table: EmbeddingTable::new(table.words.clone(), vectors)?,
        objective_trace: trace,
    })
}
