//! Bag-of-n-grams representations: document count rows, max-norm TF-IDF and
//! the naive Bayes log-count ratio.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ngram_terms, Label, TokenSeq};
use crate::error::{Error, Result};
use crate::numerics::SparseVec;

/// Unigram + bigram index with document frequencies, fitted on training text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u64>,
    num_docs: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<u64>,
    num_docs: u64,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms: r.terms,
            index,
            doc_freq: r.doc_freq,
            num_docs: r.num_docs,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            doc_freq: v.doc_freq,
            num_docs: v.num_docs,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, j: usize) -> &str {
        &self.terms[j]
    }

    pub fn doc_freq(&self, j: usize) -> u64 {
        self.doc_freq[j]
    }

    pub fn idf(&self, j: usize) -> f64 {
        (self.num_docs as f64 / self.doc_freq[j] as f64).ln()
    }
}

/// Indices are assigned in order of first occurrence.
pub fn fit_vocabulary(train_docs: &[TokenSeq]) -> Result<Vocabulary> {
    if train_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut terms = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut doc_freq: Vec<u64> = Vec::new();
    let mut last_seen: Vec<usize> = Vec::new();
    for (k, doc) in train_docs.iter().enumerate() {
        for term in ngram_terms(doc) {
            let j = match index.get(&term) {
                Some(&j) => j,
                None => {
                    let j = terms.len();
                    index.insert(term.clone(), j);
                    terms.push(term);
                    doc_freq.push(0);
                    last_seen.push(usize::MAX);
                    j
                }
            };
            if last_seen[j] != k {
                last_seen[j] = k;
                doc_freq[j] += 1;
            }
        }
    }
    Ok(Vocabulary {
        terms,
        index,
        doc_freq,
        num_docs: train_docs.len() as u64,
    })
}

/// One row of the document count matrix: raw occurrence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow(pub SparseVec);

impl CountRow {
    pub fn counts(&self) -> &SparseVec {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.nnz() == 0
    }
}

pub fn count_row(doc: &TokenSeq, vocab: &Vocabulary) -> CountRow {
    let pairs = ngram_terms(doc)
        .iter()
        .filter_map(|t| vocab.index_of(t))
        .map(|j| (j, 1.0))
        .collect();
    CountRow(SparseVec::from_pairs(vocab.len(), pairs).expect("indices come from the vocabulary"))
}

/// `F[k,j] / max_j' F[k,j'] · ln(N / n_j)`; empty rows give the zero vector.
pub fn tfidf_vector(row: &CountRow, vocab: &Vocabulary) -> SparseVec {
    let counts = row.counts();
    let max = counts.entries().iter().map(|&(_, v)| v).fold(0.0f64, f64::max);
    if max == 0.0 {
        return SparseVec::zeros(counts.dim());
    }
    let pairs = counts
        .entries()
        .iter()
        .map(|&(j, f)| (j, (f / max) * vocab.idf(j)))
        .collect();
    SparseVec::from_pairs(counts.dim(), pairs).expect("same dimension")
}

/// Smoothed per-class count vectors and their log ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcrModel {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl LcrModel {
    pub fn dim(&self) -> usize {
        self.r.len()
    }
}

/// `p = yᵀ(1 + F)`, `q = (1 − y)ᵀ(1 + F)`, `r = ln((p/‖p‖₁) / (q/‖q‖₁))`.
pub fn fit_lcr(rows: &[CountRow], labels: &[Label]) -> Result<LcrModel> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| l.is_event()).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let dim = rows[0].counts().dim();
    // the "1 +" contributes one per document of the class to every term
    let mut p = vec![n_pos as f64; dim];
    let mut q = vec![(labels.len() - n_pos) as f64; dim];
    for (row, label) in rows.iter().zip(labels) {
        if row.counts().dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.counts().dim(),
            });
        }
        let target = if label.is_event() { &mut p } else { &mut q };
        for &(j, f) in row.counts().entries() {
            target[j] += f;
        }
    }
    let p_l1: f64 = p.iter().sum();
    let q_l1: f64 = q.iter().sum();
    let r = p
        .iter()
        .zip(&q)
        .map(|(pj, qj)| ((pj / p_l1) / (qj / q_l1)).ln())
        .collect();
    Ok(LcrModel { p, q, r })
}

/// `sign(F[k,:]) ⊙ r`
pub fn lcr_vector(row: &CountRow, model: &LcrModel) -> SparseVec {
    let pairs = row
        .counts()
        .entries()
        .iter()
        .map(|&(j, _)| (j, model.r[j]))
        .collect();
    SparseVec::from_pairs(model.dim(), pairs).expect("same dimension")
}
