//! Small dense/sparse linear algebra, the project RNG, and a finite-difference
//! gradient checker.
//!
//! Every reduction here walks its operands in index order so that repeated
//! runs produce bit-identical results.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The project-wide generator. ChaCha8 produces the same stream on every
/// platform for a given seed.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derive an independent child seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub type DenseVec = Vec<f64>;

pub fn dense_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMat {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(DenseMat { rows, cols, values })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o += acc;
        }
    }

    /// `out += selfᵀ · y`
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
    }

    /// `self += y ⊗ x`
    pub fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols;
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &mut self.values[r * cols..(r + 1) * cols];
            for (v, xc) in row.iter_mut().zip(x) {
                *v += yr * xc;
            }
        }
    }
}

/// Sparse vector with strictly ascending, unique indices and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds from arbitrary (index, value) pairs: sorts, sums duplicates and
    /// drops zeros.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        if let Some(&(i, _)) = pairs.iter().find(|(i, _)| *i >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: i + 1,
            });
        }
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Ok(SparseVec { dim, entries })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        SparseVec {
            dim: values.len(),
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn dot_dense(&self, b: &[f64]) -> Result<f64> {
        if self.dim != b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        Ok(self.entries.iter().map(|&(i, v)| v * b[i]).sum())
    }

    /// Concatenates `self` and `other`, offsetting `other`'s indices by
    /// `self.dim()`.
    pub fn concat(&self, other: &SparseVec) -> SparseVec {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, v)| (i + self.dim, v)));
        SparseVec {
            dim: self.dim + other.dim,
            entries,
        }
    }
}

/// A feature row consumed by the linear classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Features {
    Sparse(SparseVec),
    Dense(DenseVec),
}

impl Features {
    pub fn dim(&self) -> usize {
        match self {
            Features::Sparse(s) => s.dim(),
            Features::Dense(d) => d.len(),
        }
    }

    pub fn dot(&self, w: &[f64]) -> Result<f64> {
        match self {
            Features::Sparse(s) => s.dot_dense(w),
            Features::Dense(d) => dense_dot(d, w),
        }
    }

    /// `out += scale · self`
    pub fn axpy(&self, scale: f64, out: &mut [f64]) {
        match self {
            Features::Sparse(s) => {
                for &(i, v) in s.entries() {
                    out[i] += scale * v;
                }
            }
            Features::Dense(d) => {
                for (o, v) in out.iter_mut().zip(d) {
                    *o += scale * v;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DenseVec {
        match self {
            Features::Sparse(s) => s.to_dense(),
            Features::Dense(d) => d.clone(),
        }
    }

    pub fn concat(&self, other: &Features) -> Features {
        match (self, other) {
            (Features::Sparse(a), Features::Sparse(b)) => Features::Sparse(a.concat(b)),
            (a, b) => {
                let mut v = a.to_dense();
                v.extend(b.to_dense());
                Features::Dense(v)
            }
        }
    }
}

/// `dot` over any mix of sparse/dense left operand and dense right operand.
pub fn dot(a: &Features, b: &[f64]) -> Result<f64> {
    a.dot(b)
}

/// Maximum component-wise relative error between `grad_f(point)` and
/// fourth-order central differences of `f` with step `eps`. The denominator
/// is `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F, G>(mut f: F, grad_f: G, point: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
    G: FnOnce(&[f64]) -> Vec<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let analytic = grad_f(point);
    if analytic.len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: point.len(),
            got: analytic.len(),
        });
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        let mut at = |k: f64| {
            x[i] = orig + k * eps;
            f(&x)
        };
        let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
        x[i] = orig;
        if ![p2, p1, m1, m2].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "objective at coordinate {i} ± {eps}"
            )));
        }
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn sparse_dot_single_entry() {
        let s = SparseVec::from_pairs(3, vec![(1, 2.0)]).unwrap();
        assert_eq!(s.dot_dense(&[5.0, 7.0, 9.0]).unwrap(), 14.0);
    }

    #[test]
    fn zero_vector_dot_is_zero() {
        let s = SparseVec::zeros(4);
        assert_eq!(s.dot_dense(&[1.0, -2.0, 3.5, 1e9]).unwrap(), 0.0);
        assert_eq!(dense_dot(&[0.0; 3], &[4.0, 5.0, 6.0]).unwrap(), 0.0);
    }

    #[test]
    fn dot_dimension_mismatch() {
        let s = SparseVec::zeros(3);
        assert!(matches!(
            s.dot_dense(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(dense_dot(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn random_sparse_dot_matches_dense() {
        let mut rng = seeded_rng(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..50)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random_range(-3.0..3.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let b: Vec<f64> = (0..50).map(|_| rng.random_range(-3.0..3.0)).collect();
            let brute: f64 = (0..50).map(|i| a[i] * b[i]).sum();
            let sparse = SparseVec::from_dense(&a).dot_dense(&b).unwrap();
            assert!((sparse - brute).abs() <= 1e-12);
            let feats = Features::Sparse(SparseVec::from_dense(&a));
            assert!((dot(&feats, &b).unwrap() - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn grad_check_square() {
        let err = grad_check(|x| x[0] * x[0], |x| vec![2.0 * x[0]], &[3.0], 1e-5).unwrap();
        assert!(err <= 1e-8, "err {err}");
    }

    #[test]
    fn grad_check_is_exact_for_quartics() {
        let f = |x: &[f64]| x[0].powi(4) - 3.0 * x[0].powi(3) + x[0];
        let g = |x: &[f64]| vec![4.0 * x[0].powi(3) - 9.0 * x[0].powi(2) + 1.0];
        let err = grad_check(f, g, &[1.7], 1e-1).unwrap();
        assert!(err <= 1e-12, "err {err}");
    }

    #[test]
    fn grad_check_constant() {
        let eps = 1e-4;
        let err = grad_check(|_| 4.2, |_| vec![0.0, 0.0], &[1.0, -1.0], eps).unwrap();
        assert!(err <= eps);
    }

    #[test]
    fn grad_check_random_quadratic() {
        // f(x) = ½ xᵀAx + bᵀx, gradient ½(A + Aᵀ)x + b
        let mut rng = seeded_rng(11);
        let n = 10;
        let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += 0.5 * x[i] * a[i * n + j] * x[j];
                }
                s += b[i] * x[i];
            }
            s
        };
        let g = |x: &[f64]| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| 0.5 * (a[i * n + j] + a[j * n + i]) * x[j])
                        .sum::<f64>()
                        + b[i]
                })
                .collect()
        };
        let err = grad_check(f, g, &x0, 1e-5).unwrap();
        assert!(err <= 1e-6, "err {err}");
    }

    #[test]
    fn grad_check_rejects_nonfinite_and_bad_eps() {
        assert!(matches!(
            grad_check(|x| 1.0 / (x[0] - 1.0).abs().min(0.0), |_| vec![0.0], &[1.0], 1e-3),
            Err(Error::NonFinite(_))
        ));
        assert!(grad_check(|_| 0.0, |_| vec![0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn matvec_helpers_agree_with_loops() {
        let m = DenseMat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = vec![0.0; 2];
        m.matvec_add(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut back = vec![0.0; 3];
        m.matvec_t_add(&[1.0, 1.0], &mut back);
        assert_eq!(back, vec![5.0, 7.0, 9.0]);
        let mut acc = DenseMat::zeros(2, 3);
        acc.outer_add(&[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(acc.values, vec![1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    proptest! {
        #[test]
        fn sparse_dense_round_trip(values in proptest::collection::vec(0.0f64..10.0, 0..40)) {
            let s = SparseVec::from_dense(&values);
            prop_assert_eq!(s.to_dense(), values.clone());
            prop_assert!(s.entries().windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert!(s.entries().iter().all(|&(_, v)| v != 0.0));
        }

        #[test]
        fn from_pairs_sums_duplicates(pairs in proptest::collection::vec((0usize..8, -5.0f64..5.0), 0..30)) {
            let s = SparseVec::from_pairs(8, pairs.clone()).unwrap();
            let mut dense = [0.0f64; 8];
            let mut sorted = pairs.clone();
            sorted.sort_by_key(|p| p.0);
            for (i, v) in sorted { dense[i] += v; }
            for i in 0..8 {
                prop_assert_eq!(s.get(i), dense[i]);
            }
        }
    }
}
