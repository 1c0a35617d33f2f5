//! Retrieval processes over a similarity space: softmax random walks,
//! Metropolis-Hastings with a depleting profitability target, and
//! power-method stationary analysis.
//!
//! Every walk draws from its own ChaCha8 stream seeded from
//! `(master seed, walk index)`, so traces are reproducible bit-for-bit and
//! independent of how walks are scheduled across threads.

mod metropolis;
mod random_walk;
mod stationary;
mod transition;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;
use crate::vocabulary::{CategoryScheme, ItemId};

pub use metropolis::{
    mh_kernel, mh_walk, profitability, MetropolisHastings, ProfitabilityModel, Proposal,
    RetrievalHistory,
};
pub use random_walk::random_walk;
pub use stationary::{stationary_distribution, support_period, StationaryDistribution};
pub use transition::{softmax_transition_matrix, DiagonalPolicy, MatrixOrigin, TransitionMatrix};

pub type WalkRng = ChaCha8Rng;

/// Default softmax temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.027;
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    RandomWalk,
    MetropolisHastings,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::RandomWalk => "random_walk",
            SamplerKind::MetropolisHastings => "metropolis_hastings",
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random_walk" => Ok(SamplerKind::RandomWalk),
            "metropolis_hastings" => Ok(SamplerKind::MetropolisHastings),
            other => Err(Error::validation(format!(
                "unknown sampler {other:?} (expected random_walk or metropolis_hastings)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Uniform,
    Softmax,
}

impl std::fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProposalKind::Uniform => "uniform",
            ProposalKind::Softmax => "softmax",
        })
    }
}

impl std::str::FromStr for ProposalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(ProposalKind::Uniform),
            "softmax" => Ok(ProposalKind::Softmax),
            other => Err(Error::validation(format!(
                "unknown proposal {other:?} (expected uniform or softmax)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub steps: usize,
    pub walks: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub proposal: ProposalKind,
    /// Geometric profitability decay per shared-category retrieval.
    pub lambda: f64,
    /// Profitability floor.
    pub epsilon: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: DEFAULT_TEMPERATURE,
            steps: 300,
            walks: 141,
            seed: 0,
            sampler: SamplerKind::RandomWalk,
            proposal: ProposalKind::Uniform,
            lambda: 0.8,
            epsilon: DEFAULT_FLOOR,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::validation(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::validation(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.steps < 2 {
            return Err(Error::validation(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.walks == 0 {
            return Err(Error::validation("walks must be at least 1"));
        }
        Ok(())
    }
}

/// One simulated retrieval sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub walk: usize,
    pub seed: u64,
    pub steps: Vec<ItemId>,
    /// Step indices where an MH proposal was rejected and the current item repeated.
    pub rejected: Vec<usize>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of walk `index` under `master`; recorded in the trace file.
pub fn walk_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

pub fn rng_from_seed(seed: u64) -> WalkRng {
    WalkRng::seed_from_u64(seed)
}

/// Uniform start item drawn from the walk's own stream.
pub fn draw_start(n: usize, rng: &mut impl Rng) -> ItemId {
    let u: f64 = rng.gen();
    ((u * n as f64) as usize).min(n - 1)
}

/// Run `cfg.walks` independent walks of the configured sampler.
pub fn simulate(
    s: &SimilarityMatrix,
    scheme: &CategoryScheme,
    cfg: &SamplerConfig,
) -> Result<Vec<WalkTrace>> {
    cfg.validate()?;
    if s.len() < 2 {
        return Err(Error::validation("simulation needs at least 2 items"));
    }
    if scheme.num_items() != s.len() {
        return Err(Error::validation(format!(
            "scheme covers {} items but similarity matrix has {}",
            scheme.num_items(),
            s.len()
        )));
    }
    let n = s.len();
    let mut traces: Vec<WalkTrace> = match cfg.sampler {
        SamplerKind::RandomWalk => {
            let p = softmax_transition_matrix(s, cfg.temperature)?;
            (0..cfg.walks)
                .into_par_iter()
                .map(|w| {
                    let seed = walk_seed(cfg.seed, w);
                    let mut rng = rng_from_seed(seed);
                    let start = draw_start(n, &mut rng);
                    let mut t = random_walk(&p, start, cfg, &mut rng);
                    t.walk = w;
                    t.seed = seed;
                    t
                })
                .collect()
        }
        SamplerKind::MetropolisHastings => {
            let mh = MetropolisHastings::new(s, scheme, cfg)?;
            (0..cfg.walks)
                .into_par_iter()
                .map(|w| {
                    let seed = walk_seed(cfg.seed, w);
                    let mut rng = rng_from_seed(seed);
                    let start = draw_start(n, &mut rng);
                    let mut t = mh.walk(start, cfg.steps, &mut rng);
                    t.walk = w;
                    t.seed = seed;
                    t
                })
                .collect()
        }
    };
    traces.sort_by_key(|t| t.walk);
    Ok(traces)
}

pub fn write_traces(traces: &[WalkTrace], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in traces {
        let line = serde_json::to_string(t).expect("trace serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trace JSONL file, checking ids against a vocabulary of size `n`.
pub fn read_traces(path: &Path, n: usize) -> Result<Vec<WalkTrace>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: WalkTrace = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, k + 1, format!("invalid trace: {e}")))?;
        if t.steps.is_empty() {
            return Err(Error::parse(path, k + 1, "trace has no steps"));
        }
        if let Some(bad) = t.steps.iter().find(|&&id| id >= n) {
            return Err(Error::parse(path, k + 1, format!("item id {bad} outside vocabulary")));
        }
        if let Some(bad) = t.rejected.iter().find(|&&r| r == 0 || r >= t.steps.len()) {
            return Err(Error::parse(path, k + 1, format!("rejected step index {bad} out of range")));
        }
        out.push(t);
    }
    out.sort_by_key(|t| t.walk);
    Ok(out)
}
