//! Exact t-SNE for 2-D projections of document vectors.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{all_finite, seeded_rng, DenseMat};

/// Inputs above this size are subsampled.
pub const MAX_POINTS: usize = 5000;
/// Entropy tolerance (nats) for the per-point bandwidth search.
pub const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// Step size; `None` uses `n / early_exaggeration`.
    pub learning_rate: Option<f64>,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// Iteration at which momentum moves from 0.5 to 0.8.
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: None,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Step size used for `n` points.
    pub fn step_size(&self, n: usize) -> f64 {
        self.learning_rate.unwrap_or(n as f64 / self.early_exaggeration)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("t-SNE needs at least 3 points, got {n}")));
        }
        if !(self.perplexity > 1.0) {
            return Err(Error::InvalidArgument(format!("perplexity must be > 1, got {}", self.perplexity)));
        }
        // The largest reachable perplexity is n - 1 (uniform neighbours).
        if self.perplexity > (n - 1) as f64 {
            return Err(Error::InvalidArgument(format!(
                "perplexity {} too large for {n} points (must be ≤ {})",
                self.perplexity,
                n - 1
            )));
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0)) || !(self.early_exaggeration >= 1.0) || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "learning rate must be > 0, exaggeration ≥ 1 and iterations ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    pub labels: Option<Vec<Label>>,
    /// Rows of the input that were projected, in order.
    pub indices: Vec<usize>,
    pub kl_initial: f64,
    pub kl_final: f64,
    /// KL divergence every 50 iterations, measured against the unexaggerated P.
    pub kl_trace: Vec<(usize, f64)>,
}

/// Symmetrized joint affinities and the per-point entropies (nats) reached
/// by the bandwidth search.
#[derive(Debug, Clone)]
pub struct Affinities {
    pub p: DenseMat,
    pub entropies: Vec<f64>,
}

fn squared_distances(vectors: &[Vec<f64>]) -> DenseMat {
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    vectors[i]
                        .iter()
                        .zip(&vectors[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    DenseMat::from_vec(n, n, rows.concat()).expect("n × n")
}

/// Conditional distribution p_{j|i} over `dists` (index `i` excluded) and its
/// entropy, for precision `beta`.
fn conditional(dists: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let dmin = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, &d) in dists.iter().enumerate() {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let shifted = d - dmin;
        let e = (-beta * shifted).exp();
        out[j] = e;
        sum += e;
        weighted += shifted * e;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Bisection on the Gaussian precision so the row entropy equals ln(perplexity).
fn calibrate_row(dists: &[f64], i: usize, perplexity: f64, out: &mut [f64]) -> f64 {
    let target = perplexity.ln();
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut h = conditional(dists, i, beta, out);
    for _ in 0..MAX_BISECTION_STEPS {
        if (h - target).abs() <= ENTROPY_TOL {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { 0.5 * (beta + hi) };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        h = conditional(dists, i, beta, out);
    }
    h
}

/// Gaussian input affinities with per-point bandwidths matched to `perplexity`.
pub fn affinities(vectors: &[Vec<f64>], perplexity: f64) -> Result<Affinities> {
    let n = vectors.len();
    if let Some(v) = vectors.iter().find(|v| v.len() != vectors[0].len()) {
        return Err(Error::DimensionMismatch {
            expected: vectors[0].len(),
            got: v.len(),
        });
    }
    if !vectors.iter().all(|v| all_finite(v)) {
        return Err(Error::NonFinite("t-SNE input".into()));
    }
    let d = squared_distances(vectors);
    if d.values.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateAffinities);
    }
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let h = calibrate_row(d.row(i), i, perplexity, &mut row);
            (row, h)
        })
        .collect();
    let mut p = DenseMat::zeros(n, n);
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p.values[i * n + j] = (rows[i].0[j] + rows[j].0[i]) * scale;
        }
    }
    Ok(Affinities {
        p,
        entropies: rows.into_iter().map(|(_, h)| h).collect(),
    })
}

/// Student-t kernel values `1 / (1 + |y_i - y_j|²)` (zero diagonal) and their sum.
fn kernel(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let n = y.len();
    let num: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let dx = y[i][0] - y[j][0];
                        let dy = y[i][1] - y[j][1];
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect()
        })
        .collect();
    let total = num.iter().map(|r| r.iter().sum::<f64>()).sum();
    (num, total)
}

/// KL(P ‖ Q) for the embedding `y`.
pub fn kl_divergence(p: &DenseMat, y: &[[f64; 2]]) -> f64 {
    let (num, total) = kernel(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if pij > 0.0 {
                let q = (num[i][j] / total).max(f64::MIN_POSITIVE);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

fn gradient(p: &DenseMat, y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let (num, total) = kernel(y);
    (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..y.len() {
                let w = (exaggeration * p.get(i, j) - num[i][j] / total) * num[i][j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

/// Rows kept when `n` exceeds `cap`: a seeded uniform sample, in input order.
pub fn subsample(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = seeded_rng(seed);
    let mut idx = sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Projects `vectors` to 2-D. `labels`, when given, must align with `vectors`.
pub fn project(vectors: &[Vec<f64>], labels: Option<&[Label]>, cfg: &TsneConfig) -> Result<Projection> {
    if let Some(l) = labels {
        if l.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                got: l.len(),
            });
        }
    }
    let indices = subsample(vectors.len(), MAX_POINTS, cfg.seed);
    let kept: Vec<Vec<f64>> = indices.iter().map(|&i| vectors[i].clone()).collect();
    let n = kept.len();
    cfg.validate(n)?;
    let p = affinities(&kept, cfg.perplexity)?.p;

    let mut rng = seeded_rng(cfg.seed);
    let normal = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let lr = cfg.step_size(n);
    let kl_initial = kl_divergence(&p, &y);
    let mut kl_trace = vec![(0, kl_initial)];

    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { 0.5 } else { 0.8 };
        let grad = gradient(&p, &y, exaggeration);
        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                gains[i][k] = if (g > 0.0) != (update[i][k] > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                update[i][k] = momentum * update[i][k] - lr * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        for k in 0..2 {
            let mean = y.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[k] -= mean);
        }
        if !y.iter().all(|p| p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::Divergence {
                step: it + 1,
                loss: f64::NAN,
            });
        }
        if (it + 1) % 50 == 0 {
            kl_trace.push((it + 1, kl_divergence(&p, &y)));
        }
    }
    let kl_final = kl_divergence(&p, &y);
    if kl_trace.last().map(|t| t.0) != Some(cfg.iterations) {
        kl_trace.push((cfg.iterations, kl_final));
    }
    Ok(Projection {
        points: y,
        labels: labels.map(|l| indices.iter().map(|&i| l[i]).collect()),
        indices,
        kl_initial,
        kl_final,
        kl_trace,
    })
}

/// Writes `id,x,y,label` rows; `ids` is indexed by input row.
pub fn write_points_csv<W: Write>(mut w: W, ids: &[String], proj: &Projection) -> std::io::Result<()> {
    writeln!(w, "id,x,y,label")?;
    for (k, (&i, pt)) in proj.indices.iter().zip(&proj.points).enumerate() {
        let label = proj.labels.as_ref().map(|l| l[k].as_str()).unwrap_or("");
        let id = ids.get(i).map(String::as_str).unwrap_or("");
        let id = if id.contains([',', '"', '\n']) {
            format!("\"{}\"", id.replace('"', "\"\""))
        } else {
            id.to_string()
        };
        writeln!(w, "{id},{},{},{label}", pt[0], pt[1])?;
    }
    Ok(())
}

/// Scatter plot with one colour per class.
pub fn render_svg(proj: &Projection, title: &str) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 30.0;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &proj.points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{escaped}</text>"#);
    for (k, p) in proj.points.iter().enumerate() {
        let colour = match proj.labels.as_ref().map(|l| l[k]) {
            Some(Label::Event) => "#d62728",
            Some(Label::Other) => "#1f77b4",
            None => "#7f7f7f",
        };
        let cx = MARGIN + (p[0] - lo[0]) * scale;
        let cy = SIZE - MARGIN - (p[1] - lo[1]) * scale;
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{colour}" fill-opacity="0.7"/>"#);
    }
    if proj.labels.is_some() {
        let _ = writeln!(s, r##"<circle cx="{}" cy="20" r="4" fill="#d62728"/>"##, SIZE - 150.0);
        let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="12">event</text>"#, SIZE - 140.0);
        let _ = writeln!(s, r##"<circle cx="{}" cy="20" r="4" fill="#1f77b4"/>"##, SIZE - 80.0);
        let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="12">other</text>"#, SIZE - 70.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|i| {
                let centre = (i % 3) as f64 * 4.0;
                (0..dim).map(|_| centre + rng.random_range(-1.0..1.0)).collect()
            })
            .collect()
    }

    #[test]
    fn equilateral_triangle_is_uniform() {
        let h = 3f64.sqrt() / 2.0;
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]];
        let a = affinities(&pts, 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(a.p.get(i, i), 0.0);
            for j in 0..3 {
                if i != j {
                    assert!((a.p.get(i, j) - 1.0 / 6.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = affinities(&cloud(12, 4, 3), 4.0).unwrap().p;
        let mut rng = seeded_rng(4);
        let flat: Vec<f64> = (0..24).map(|_| rng.random_range(-2.0..2.0)).collect();
        let unflat = |v: &[f64]| v.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
        let err = crate::numerics::grad_check(
            |v| kl_divergence(&p, &unflat(v)),
            |v| gradient(&p, &unflat(v), 1.0).concat(),
            &flat,
            1e-3,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn p_is_symmetric_and_normalized() {
        let a = affinities(&cloud(40, 5, 1), 10.0).unwrap();
        let n = 40;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                assert!(a.p.get(i, j) >= 0.0);
                assert!((a.p.get(i, j) - a.p.get(j, i)).abs() <= 1e-9);
                sum += a.p.get(i, j);
            }
        }
        assert!((sum - 1.0).abs() <= 1e-9);
        for h in a.entropies {
            assert!((h - 10f64.ln()).abs() <= 1e-4);
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 2.0]; 5];
        let err = project(&pts, None, &TsneConfig { perplexity: 2.0, ..TsneConfig::default() }).unwrap_err();
        assert_eq!(err.to_string(), "degenerate affinities");
    }

    #[test]
    fn perplexity_must_fit_the_points() {
        let pts = cloud(5, 2, 0);
        for perp in [5.0, 7.0, 4.5] {
            let cfg = TsneConfig { perplexity: perp, ..TsneConfig::default() };
            assert!(project(&pts, None, &cfg).is_err());
        }
        let two = cloud(2, 2, 0);
        assert!(project(&two, None, &TsneConfig { perplexity: 1.5, ..TsneConfig::default() }).is_err());
    }

    #[test]
    fn near_pair_stays_near() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![0.01, 0.0, 0.0], vec![5.0, 5.0, 5.0]];
        let mut ok = 0;
        for seed in 0..10 {
            let cfg = TsneConfig { perplexity: 1.5, seed, ..TsneConfig::default() };
            let y = project(&pts, None, &cfg).unwrap().points;
            let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            if d(y[0], y[1]) < d(y[0], y[2]) && d(y[0], y[1]) < d(y[1], y[2]) {
                ok += 1;
            }
        }
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn descent_reduces_kl_and_is_reproducible() {
        let pts = cloud(50, 8, 3);
        let labels: Vec<Label> = (0..50).map(|i| Label::from_bool(i % 3 == 0)).collect();
        let cfg = TsneConfig { perplexity: 10.0, iterations: 500, seed: 4, ..TsneConfig::default() };
        let a = project(&pts, Some(&labels), &cfg).unwrap();
        assert!(a.kl_final < a.kl_initial, "{} vs {}", a.kl_final, a.kl_initial);
        let b = project(&pts, Some(&labels), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.as_deref(), Some(labels.as_slice()));
    }

    #[test]
    fn subsample_is_sorted_and_seeded() {
        assert_eq!(subsample(4, 10, 0), vec![0, 1, 2, 3]);
        let s = subsample(100, 10, 7);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, subsample(100, 10, 7));
    }

    #[test]
    fn csv_and_svg_outputs() {
        let proj = Projection {
            points: vec![[0.5, -1.0], [2.0, 3.0]],
            labels: Some(vec![Label::Event, Label::Other]),
            indices: vec![0, 2],
            kl_initial: 1.0,
            kl_final: 0.5,
            kl_trace: vec![],
        };
        let ids = vec!["a".to_string(), "b".into(), "c,d".into()];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &ids, &proj).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,x,y,label\na,0.5,-1,event\n\"c,d\",2,3,other\n");
        let svg = render_svg(&proj, "desc");
        assert_eq!(svg.matches("r=\"2.5\"").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
