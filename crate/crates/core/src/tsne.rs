//! Exact t-SNE for 2-D views of an embedding set.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::samplers::rng_from_seed;
use crate::vocabulary::Vocabulary;

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsneDistance {
    SquaredEuclidean,
    Cosine,
}

impl std::str::FromStr for TsneDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_euclidean" => Ok(TsneDistance::SquaredEuclidean),
            "cosine" => Ok(TsneDistance::Cosine),
            other => Err(Error::validation(format!(
                "unknown t-SNE distance '{other}' (expected squared_euclidean or cosine)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
    pub distance: TsneDistance,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
            distance: TsneDistance::SquaredEuclidean,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::validation(format!("t-SNE needs at least 4 points, got {n}")));
        }
        if !(self.perplexity > 0.0) || self.perplexity >= (n as f64 - 1.0) / 3.0 {
            return Err(Error::validation(format!(
                "perplexity {} must lie in (0, (N−1)/3) = (0, {:.3}) for N = {n}",
                self.perplexity,
                (n as f64 - 1.0) / 3.0
            )));
        }
        if self.iterations == 0 {
            return Err(Error::validation("t-SNE iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("t-SNE learning rate must be positive"));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::validation("t-SNE momentum must lie in [0, 1)"));
            }
        }
        if !(self.exaggeration >= 1.0 && self.exaggeration.is_finite()) {
            return Err(Error::validation("early exaggeration factor must be at least 1"));
        }
        Ok(())
    }
}

/// Per-point bandwidths and the conditional affinities `p_{j|i}` (row i).
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigmas: Vec<f64>,
    pub conditional: DenseMatrix,
    /// Entropy of each row in bits.
    pub entropies: Vec<f64>,
}

/// Row of `exp(−β d_ij)` normalized over `j ≠ i`; returns entropy in bits.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (j, (o, &d)) in out.iter_mut().zip(dist).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (d - min)).exp() };
        total += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= total;
        if *o > 0.0 {
            h -= *o * o.log2();
        }
    }
    h
}

/// Bisection on `β_i = 1/(2σ_i²)` until the row entropy is within 1e-5 bits
/// of `log₂ perplexity`.
pub fn perplexity_calibration(distances: &DenseMatrix, perplexity: f64) -> Result<Calibration> {
    let n = distances.rows();
    if !distances.is_square() || n < 2 {
        return Err(Error::validation("calibration needs a square distance matrix with N ≥ 2"));
    }
    if !(perplexity > 0.0) || perplexity > (n - 1) as f64 {
        return Err(Error::validation(format!(
            "perplexity {perplexity} is infeasible for {n} points (must not exceed N−1)"
        )));
    }
    let target = perplexity.log2();
    let rows: Vec<(f64, Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist = distances.row(i);
            let mut row = vec![0.0; n];
            let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
            let mut h = conditional_row(dist, i, beta, &mut row);
            for _ in 0..MAX_BISECTIONS {
                if (h - target).abs() <= ENTROPY_TOL {
                    break;
                }
                if h > target {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = 0.5 * (beta + lo);
                }
                h = conditional_row(dist, i, beta, &mut row);
            }
            ((0.5 / beta).sqrt(), row, h)
        })
        .collect();
    let mut conditional = DenseMatrix::zeros(n, n);
    let mut sigmas = Vec::with_capacity(n);
    let mut entropies = Vec::with_capacity(n);
    for (i, (sigma, row, h)) in rows.into_iter().enumerate() {
        conditional.row_mut(i).copy_from_slice(&row);
        sigmas.push(sigma);
        entropies.push(h);
    }
    Ok(Calibration {
        sigmas,
        conditional,
        entropies,
    })
}

pub fn input_distances(e: &EmbeddingMatrix, metric: TsneDistance) -> DenseMatrix {
    let n = e.len();
    let norms: Vec<f64> = (0..n).map(|i| dot(e.row(i), e.row(i)).sqrt()).collect();
    let mut d = DenseMatrix::zeros(n, n);
    d.rows_mut().enumerate().par_bridge().for_each(|(i, out)| {
        for (j, slot) in out.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            *slot = match metric {
                TsneDistance::SquaredEuclidean => e
                    .row(i)
                    .iter()
                    .zip(e.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
                TsneDistance::Cosine => (1.0 - dot(e.row(i), e.row(j)) / (norms[i] * norms[j])).max(0.0),
            };
        }
    });
    d
}

/// `P = (p_{j|i} + p_{i|j}) / 2N`.
pub fn joint_probabilities(cal: &Calibration) -> DenseMatrix {
    let c = &cal.conditional;
    let n = c.rows();
    let mut p = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p.set(i, j, (c.get(i, j) + c.get(j, i)) / (2.0 * n as f64));
        }
    }
    p
}

/// Student-t kernel numerators `1/(1+‖y_i−y_j‖²)` (zero diagonal) and their sum.
fn kernel(y: &[[f64; 2]]) -> (DenseMatrix, f64) {
    let n = y.len();
    let mut num = DenseMatrix::zeros(n, n);
    let row_sums: Vec<f64> = num
        .rows_mut()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, out)| {
            let mut s = 0.0;
            for (j, slot) in out.iter_mut().enumerate() {
                if i != j {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    *slot = 1.0 / (1.0 + dx * dx + dy * dy);
                    s += *slot;
                }
            }
            s
        })
        .collect();
    (num, row_sums.iter().sum())
}

fn kl_from_kernel(p: &DenseMatrix, num: &DenseMatrix, z: f64) -> f64 {
    let n = p.rows();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                let pij = p.get(i, j);
                if i != j && pij > 0.0 {
                    s += pij * (pij / (num.get(i, j) / z)).ln();
                }
            }
            s
        })
        .collect();
    rows.iter().sum::<f64>().max(0.0)
}

/// `KL(P‖Q)` for output coordinates `y`.
pub fn kl_divergence(p: &DenseMatrix, y: &[[f64; 2]]) -> f64 {
    let (num, z) = kernel(y);
    kl_from_kernel(p, &num, z)
}

/// `∂KL/∂y_i = 4 Σ_j (αP_ij − Q_ij)(y_i − y_j)/(1+‖y_i−y_j‖²)` with
/// exaggeration `α`.
pub fn kl_gradient(p: &DenseMatrix, y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let (num, z) = kernel(y);
    gradient_from_kernel(p, y, &num, z, exaggeration)
}

fn gradient_from_kernel(p: &DenseMatrix, y: &[[f64; 2]], num: &DenseMatrix, z: f64, exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num.get(i, j);
                let m = (exaggeration * p.get(i, j) - w / z) * w;
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoints {
    pub coordinates: Vec<[f64; 2]>,
    pub kl: f64,
    /// KL at the start of each iteration, without exaggeration.
    pub kl_trace: Vec<f64>,
}

pub fn initial_layout(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect()
}

/// Gradient descent on `KL(P‖Q)` with momentum, per-coordinate adaptive
/// gains and early exaggeration, starting from [`initial_layout`].
pub fn tsne_from_affinities(p: &DenseMatrix, cfg: &TsneConfig) -> Result<ProjectedPoints> {
    let n = p.rows();
    let mut y = initial_layout(n, cfg.seed);
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut kl_trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };
        let (num, z) = kernel(&y);
        kl_trace.push(kl_from_kernel(p, &num, z));
        let grad = gradient_from_kernel(p, &y, &num, z, exaggeration);
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                gains[i][d] = if (g > 0.0) != (velocity[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8_f64).max(MIN_GAIN)
                };
                velocity[i][d] = momentum * velocity[i][d] - cfg.learning_rate * gains[i][d] * g;
                y[i][d] += velocity[i][d];
            }
        }
        let mean = y.iter().fold([0.0; 2], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for v in y.iter_mut() {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
        if let Some(i) = y.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::Numeric(format!(
                "t-SNE diverged at iteration {}: point {i} is non-finite",
                it + 1
            )));
        }
    }
    let kl = kl_divergence(p, &y);
    Ok(ProjectedPoints {
        coordinates: y,
        kl,
        kl_trace,
    })
}

pub fn tsne(e: &EmbeddingMatrix, cfg: &TsneConfig) -> Result<ProjectedPoints> {
    cfg.validate(e.len())?;
    let d = input_distances(e, cfg.distance);
    let cal = perplexity_calibration(&d, cfg.perplexity)?;
    tsne_from_affinities(&joint_probabilities(&cal), cfg)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a TsneConfig,
    kl: f64,
    initialization: String,
}

/// Writes `id,name,x,y` and a `<stem>.json` sidecar with config and final KL.
pub fn write_projection(points: &ProjectedPoints, vocab: &Vocabulary, cfg: &TsneConfig, csv_path: &Path) -> Result<()> {
    if points.coordinates.len() != vocab.len() {
        return Err(Error::validation("projection and vocabulary sizes differ"));
    }
    let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::io(csv_path, std::io::Error::other(e));
    w.write_record(["id", "name", "x", "y"]).map_err(io)?;
    for (item, c) in vocab.items().iter().zip(&points.coordinates) {
        w.write_record([item.id.to_string(), item.name.clone(), format!("{:?}", c[0]), format!("{:?}", c[1])])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    let sidecar = csv_path.with_extension("json");
    let body = Sidecar {
        config: cfg,
        kl: points.kl,
        initialization: format!("isotropic normal, std {INIT_STD:e}, seeded"),
    };
    let mut f = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    serde_json::to_writer_pretty(&mut f, &body).map_err(|e| Error::io(&sidecar, e.into()))?;
    writeln!(f).map_err(|e| Error::io(&sidecar, e))
}
