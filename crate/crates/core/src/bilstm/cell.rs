//! A single LSTM direction: parameters, the forward step and its adjoint.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, DenseMat, Rng};

/// Gate blocks are stacked in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden: usize,
    pub input: usize,
    /// 4H × d
    pub w_x: DenseMat,
    /// 4H × H
    pub w_h: DenseMat,
    /// 4H
    pub bias: Vec<f64>,
}

pub const INIT_SCALE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            hidden,
            input,
            w_x: DenseMat::zeros(4 * hidden, input),
            w_h: DenseMat::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform(−0.08, 0.08) weights, zero biases except the forget gate at 1.
    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(hidden, input);
        for v in p.w_x.values.iter_mut().chain(p.w_h.values.iter_mut()) {
            *v = rng.random_range(-INIT_SCALE..INIT_SCALE);
        }
        p.bias[hidden..2 * hidden].fill(FORGET_BIAS);
        p
    }

    pub fn num_params(&self) -> usize {
        self.w_x.values.len() + self.w_h.values.len() + self.bias.len()
    }

    pub fn slices(&self) -> [&[f64]; 3] {
        [&self.w_x.values, &self.w_h.values, &self.bias]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.w_x.values, &mut self.w_h.values, &mut self.bias]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Everything the backward step needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// post-activation gates, stacked like the parameters
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn check_dims(params: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
    for (expected, got) in [
        (params.input, x.len()),
        (params.hidden, h_prev.len()),
        (params.hidden, c_prev.len()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

pub(crate) fn step_cached(params: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let hs = params.hidden;
    let mut z = params.bias.clone();
    params.w_x.matvec_add(x, &mut z);
    params.w_h.matvec_add(h_prev, &mut z);
    let mut gates = z;
    for (k, g) in gates.iter_mut().enumerate() {
        *g = if (2 * hs..3 * hs).contains(&k) { g.tanh() } else { sigmoid(*g) };
    }
    let mut c = vec![0.0; hs];
    let mut tanh_c = vec![0.0; hs];
    let mut h = vec![0.0; hs];
    for j in 0..hs {
        let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h,
    }
}

/// `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_step(params: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(params, x, h_prev, c_prev)?;
    let cache = step_cached(params, x, h_prev, c_prev);
    Ok((cache.h, cache.c))
}

/// Gradients flowing out of one backward step.
pub struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Accumulates parameter gradients into `grads` given the loss gradients
/// with respect to this step's `h` and `c`.
pub(crate) fn step_backward(
    params: &LstmParams,
    cache: &StepCache,
    dh: &[f64],
    dc_next: &[f64],
    grads: &mut LstmParams,
) -> StepGrads {
    let hs = params.hidden;
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * hs];
    let mut dc_prev = vec![0.0; hs];
    for j in 0..hs {
        let (i, f, cand, o) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
        let tc = cache.tanh_c[j];
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dc * cand * i * (1.0 - i);
        dz[hs + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * hs + j] = dc * i * (1.0 - cand * cand);
        dz[3 * hs + j] = dh[j] * tc * o * (1.0 - o);
        dc_prev[j] = dc * f;
    }
    grads.w_x.outer_add(&dz, &cache.x);
    grads.w_h.outer_add(&dz, &cache.h_prev);
    for (b, d) in grads.bias.iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = vec![0.0; params.input];
    params.w_x.matvec_t_add(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hs];
    params.w_h.matvec_t_add(&dz, &mut dh_prev);
    StepGrads { dx, dh_prev, dc_prev }
}

/// Gradients of a loss through one step, given its gradients `dh` and `dc`
/// with respect to the step's outputs: parameter gradients, then the
/// gradients for `x`, `h_prev` and `c_prev`.
pub fn lstm_step_backward(
    params: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    dh: &[f64],
    dc: &[f64],
) -> Result<(LstmParams, StepGrads)> {
    check_dims(params, x, h_prev, c_prev)?;
    for got in [dh.len(), dc.len()] {
        if got != params.hidden {
            return Err(Error::DimensionMismatch {
                expected: params.hidden,
                got,
            });
        }
    }
    let cache = step_cached(params, x, h_prev, c_prev);
    let mut grads = LstmParams::zeros(params.hidden, params.input);
    let out = step_backward(params, &cache, dh, dc, &mut grads);
    Ok((grads, out))
}

/// Runs the cell over `xs` from a zero state.
pub(crate) fn run_sequence(params: &LstmParams, xs: &[&[f64]]) -> Vec<StepCache> {
    let mut caches: Vec<StepCache> = Vec::with_capacity(xs.len());
    let zero = vec![0.0; params.hidden];
    for x in xs {
        let (h, c) = match caches.last() {
            Some(prev) => (prev.h.as_slice(), prev.c.as_slice()),
            None => (zero.as_slice(), zero.as_slice()),
        };
        let cache = step_cached(params, x, h, c);
        caches.push(cache);
    }
    caches
}

/// Backpropagation through time. `dh_ext[t]` is the loss gradient reaching
/// `h_t` from outside the recurrence. Returns the gradient for each input.
pub(crate) fn backprop_sequence(
    params: &LstmParams,
    caches: &[StepCache],
    dh_ext: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let hs = params.hidden;
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut dxs = vec![Vec::new(); caches.len()];
    for t in (0..caches.len()).rev() {
        let dh: Vec<f64> = dh_ext[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let out = step_backward(params, &caches[t], &dh, &dc_next, grads);
        dh_next = out.dh_prev;
        dc_next = out.dc_prev;
        dxs[t] = out.dx;
    }
    dxs
}
