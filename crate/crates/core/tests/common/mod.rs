#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use forage::config::RunConfig;
use forage::embedding::EmbeddingMatrix;
use forage::samplers::rng_from_seed;

pub const LABELS: [&str; 4] = ["north", "east", "south", "west"];

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn orthogonal_to(mut v: Vec<f64>, basis: &[&[f64]]) -> Vec<f64> {
    for b in basis {
        let p = dot(&v, b);
        v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x -= p * y);
    }
    normalize(v)
}

/// Rotates `(e, w)` by `angle` within their plane.
fn rotate(e: &mut Vec<f64>, w: &mut Vec<f64>, angle: f64) {
    let (s, c) = angle.sin_cos();
    let ne: Vec<f64> = e.iter().zip(w.iter()).map(|(a, b)| c * a + s * b).collect();
    let nw: Vec<f64> = e.iter().zip(w.iter()).map(|(a, b)| -s * a + c * b).collect();
    *e = ne;
    *w = nw;
}

/// Parameters of a chain of categories laid along geodesic arcs.
///
/// Each category is an arc of `span` degrees whose items bunch toward both
/// ends; consecutive arcs are separated by a `gap` and the path turns by
/// `corner` degrees into a fresh direction at every boundary. Items are
/// near-neighbours of their own arc, while the short hop across a boundary is
/// the only cheap way into the next category.
#[derive(Debug, Clone, Copy)]
pub struct ArcSpace {
    pub categories: usize,
    pub per_category: usize,
    pub span: f64,
    pub gap: f64,
    pub corner: f64,
    pub dimension: usize,
    pub seed: u64,
}

impl Default for ArcSpace {
    fn default() -> Self {
        ArcSpace {
            categories: 4,
            per_category: 15,
            span: 52.0,
            gap: 6.0,
            corner: 40.0,
            dimension: 64,
            seed: 0,
        }
    }
}

impl ArcSpace {
    pub fn build(&self) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from_seed(self.seed);
        let d = self.dimension;
        let mut e = normalize(gaussian(&mut rng, d));
        let mut w = orthogonal_to(gaussian(&mut rng, d), &[&e]);
        let m = self.per_category;
        let positions: Vec<f64> = (0..m)
            .map(|i| {
                let u = i as f64 / (m - 1) as f64;
                self.span.to_radians() * (0.5 - 0.5 * (std::f64::consts::PI * u).cos())
            })
            .collect();
        let mut rows = Vec::new();
        let mut cats = Vec::new();
        for k in 0..self.categories {
            for i in 0..m {
                rows.push(e.clone());
                cats.push(k);
                if i + 1 < m {
                    rotate(&mut e, &mut w, positions[i + 1] - positions[i]);
                }
            }
            let f = orthogonal_to(gaussian(&mut rng, d), &[&e, &w]);
            let (s, c) = self.corner.to_radians().sin_cos();
            w = w.iter().zip(&f).map(|(a, b)| c * a + s * b).collect();
            rotate(&mut e, &mut w, self.gap.to_radians());
        }
        (rows, cats)
    }
}

/// Items sharing one common direction plus isotropic noise: similarities
/// hover around 0.5 with no category contrast.
pub fn near_uniform_space(n: usize, categories: usize, dimension: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let g = normalize(gaussian(&mut rng, dimension));
    let scale = 0.5f64.sqrt();
    let rows = (0..n)
        .map(|_| {
            let noise = gaussian(&mut rng, dimension);
            g.iter()
                .zip(noise)
                .map(|(a, z)| scale * a + scale * z / (dimension as f64).sqrt())
                .collect()
        })
        .collect();
    let per = n / categories;
    (rows, (0..n).map(|i| (i / per).min(categories - 1)).collect())
}

pub fn random_embeddings(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut rng, d)).collect();
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

/// Writes `vocab.csv` (with descriptions) and `embeddings.jsonl` into `dir`.
pub fn write_space(dir: &Path, rows: &[Vec<f64>], cats: &[usize]) -> (PathBuf, PathBuf) {
    fs::create_dir_all(dir).unwrap();
    let mut csv = String::from("name,description,categories\n");
    for (i, &c) in cats.iter().enumerate() {
        writeln!(csv, "{}{i:02},A {} thing number {i}.,{}", LABELS[c % 4], LABELS[c % 4], LABELS[c % 4]).unwrap();
    }
    let vocab = dir.join("vocab.csv");
    fs::write(&vocab, csv).unwrap();
    let emb = dir.join("embeddings.jsonl");
    EmbeddingMatrix::from_rows(rows).unwrap().write_jsonl(&emb).unwrap();
    (vocab, emb)
}

/// Writes a config file and loads it.
pub fn write_config(dir: &Path, body: &str) -> RunConfig {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    cfg
}
