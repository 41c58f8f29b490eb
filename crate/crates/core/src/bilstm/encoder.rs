//! Bidirectional document encoder producing `[mean_t h_t, h^b_final, h^f_final]`.

use serde::{Deserialize, Serialize};

use super::cell::{backprop_sequence, run_sequence, LstmParams, StepCache};
use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::glove::EmbeddingTable;
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmEncoder {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

/// `[mean of h_t (2H, backward half first), backward final (H), forward final (H)]`
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector(pub Vec<f64>);

impl DocVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Forward-pass state kept for backpropagation.
pub struct EncodeCache {
    pub(crate) fwd: Vec<StepCache>,
    pub(crate) bwd: Vec<StepCache>,
}

impl BiLstmEncoder {
    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Self {
        BiLstmEncoder {
            forward: LstmParams::init(hidden, input, rng),
            backward: LstmParams::init(hidden, input, rng),
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        BiLstmEncoder {
            forward: LstmParams::zeros(hidden, input),
            backward: LstmParams::zeros(hidden, input),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn input(&self) -> usize {
        self.forward.input
    }

    pub fn output_dim(&self) -> usize {
        4 * self.hidden()
    }

    pub fn num_params(&self) -> usize {
        self.forward.num_params() + self.backward.num_params()
    }

    /// Encodes a token sequence, mapping unknown words to the table's
    /// fallback vector.
    pub fn encode(&self, embeddings: &EmbeddingTable, tokens: &TokenSeq) -> Result<DocVector> {
        let xs: Vec<&[f64]> = tokens.iter().map(|t| embeddings.vector(t)).collect();
        self.encode_inputs(&xs)
    }

    pub fn encode_inputs(&self, xs: &[&[f64]]) -> Result<DocVector> {
        Ok(self.forward_cached(xs)?.0)
    }

    pub(crate) fn forward_cached(&self, xs: &[&[f64]]) -> Result<(DocVector, EncodeCache)> {
        if xs.is_empty() {
            return Err(Error::EmptyDocument);
        }
        if let Some(x) = xs.iter().find(|x| x.len() != self.input()) {
            return Err(Error::DimensionMismatch {
                expected: self.input(),
                got: x.len(),
            });
        }
        let k = xs.len();
        let hs = self.hidden();
        let fwd = run_sequence(&self.forward, xs);
        let reversed: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let bwd = run_sequence(&self.backward, &reversed);

        let mut out = vec![0.0; 4 * hs];
        for t in 0..k {
            // backward state aligned to position t was produced after consuming x_t
            let hb = &bwd[k - 1 - t].h;
            let hf = &fwd[t].h;
            for j in 0..hs {
                out[j] += hb[j];
                out[hs + j] += hf[j];
            }
        }
        let kf = k as f64;
        out[..2 * hs].iter_mut().for_each(|v| *v /= kf);
        out[2 * hs..3 * hs].copy_from_slice(&bwd[k - 1].h);
        out[3 * hs..].copy_from_slice(&fwd[k - 1].h);
        Ok((DocVector(out), EncodeCache { fwd, bwd }))
    }

    /// Accumulates parameter gradients for `d_out = ∂L/∂DocVector` and returns
    /// `∂L/∂x_t` for each input position.
    pub(crate) fn backward(&self, cache: &EncodeCache, d_out: &[f64], grads: &mut BiLstmEncoder) -> Vec<Vec<f64>> {
        let hs = self.hidden();
        let k = cache.fwd.len();
        let kf = k as f64;
        let d_mean_b: Vec<f64> = d_out[..hs].iter().map(|v| v / kf).collect();
        let d_mean_f: Vec<f64> = d_out[hs..2 * hs].iter().map(|v| v / kf).collect();
        let mut dh_f = vec![d_mean_f; k];
        let mut dh_b = vec![d_mean_b; k];
        for j in 0..hs {
            dh_b[k - 1][j] += d_out[2 * hs + j];
            dh_f[k - 1][j] += d_out[3 * hs + j];
        }
        let dx_f = backprop_sequence(&self.forward, &cache.fwd, &dh_f, &mut grads.forward);
        let dx_b = backprop_sequence(&self.backward, &cache.bwd, &dh_b, &mut grads.backward);
        // backward step s consumed x_{k-1-s}
        (0..k)
            .map(|t| dx_f[t].iter().zip(&dx_b[k - 1 - t]).map(|(a, b)| a + b).collect())
            .collect()
    }
}
