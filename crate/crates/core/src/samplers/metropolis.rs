//! Metropolis-Hastings retrieval with a depleting profitability target.
//!
//! The target `π(i) = max(ε, base(i) · λ^{n_c(i)})` starts at the item's mean
//! similarity to same-category items and decays geometrically with every
//! unique retrieval that shares a category with it. Because `π` depends on
//! the retrieval history, the chain is time-inhomogeneous unless `λ = 1`.

use rand::Rng;

use super::{softmax_transition_matrix, ProposalKind, SamplerConfig, TransitionMatrix, WalkTrace};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::similarity::SimilarityMatrix;
use crate::vocabulary::{CategoryScheme, ItemId};

#[derive(Debug, Clone)]
pub struct ProfitabilityModel {
    base: Vec<f64>,
    /// Items sharing at least one category with each item, itself included.
    overlaps: Vec<Vec<ItemId>>,
    lambda: f64,
    epsilon: f64,
}

impl ProfitabilityModel {
    pub fn new(s: &SimilarityMatrix, scheme: &CategoryScheme, lambda: f64, epsilon: f64) -> Result<Self> {
        if scheme.num_items() != s.len() {
            return Err(Error::validation("scheme and similarity matrix sizes differ"));
        }
        if !(lambda > 0.0 && lambda <= 1.0) || !(epsilon > 0.0) {
            return Err(Error::validation("profitability needs λ ∈ (0, 1] and ε > 0"));
        }
        let n = s.len();
        let mut base = Vec::with_capacity(n);
        let mut overlaps = Vec::with_capacity(n);
        for i in 0..n {
            let mates: Vec<ItemId> = (0..n).filter(|&k| scheme.shares_category(i, k)).collect();
            let others: Vec<f64> = mates.iter().filter(|&&k| k != i).map(|&k| s.get(i, k)).collect();
            base.push(if others.is_empty() {
                epsilon
            } else {
                others.iter().sum::<f64>() / others.len() as f64
            });
            overlaps.push(mates);
        }
        Ok(ProfitabilityModel {
            base,
            overlaps,
            lambda,
            epsilon,
        })
    }

    /// Model with explicit base values and no category structure (`n_c ≡ 0`).
    pub fn from_base(base: Vec<f64>, lambda: f64, epsilon: f64) -> Self {
        let overlaps = vec![Vec::new(); base.len()];
        ProfitabilityModel {
            base,
            overlaps,
            lambda,
            epsilon,
        }
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Items sharing a category with `i` (itself included when categorized).
    pub fn overlapping(&self, i: ItemId) -> &[ItemId] {
        &self.overlaps[i]
    }

    pub fn history(&self) -> RetrievalHistory {
        RetrievalHistory {
            retrieved: vec![false; self.base.len()],
            shared: vec![0; self.base.len()],
            unique: 0,
        }
    }

    /// Static target with no depletion, as used by the λ = 1 analyses.
    pub fn static_target(&self) -> Vec<f64> {
        self.base.iter().map(|&b| b.max(self.epsilon)).collect()
    }
}

/// Unique retrievals so far, with `n_c(i)` maintained incrementally.
#[derive(Debug, Clone)]
pub struct RetrievalHistory {
    retrieved: Vec<bool>,
    shared: Vec<u32>,
    unique: usize,
}

impl RetrievalHistory {
    /// Record a retrieval; repeats are ignored.
    pub fn record(&mut self, item: ItemId, model: &ProfitabilityModel) {
        if std::mem::replace(&mut self.retrieved[item], true) {
            return;
        }
        self.unique += 1;
        for &k in model.overlapping(item) {
            self.shared[k] += 1;
        }
    }

    /// Distinct retrieved items sharing at least one category with `i`.
    pub fn shared_count(&self, i: ItemId) -> u32 {
        self.shared[i]
    }

    pub fn contains(&self, i: ItemId) -> bool {
        self.retrieved[i]
    }

    pub fn unique_count(&self) -> usize {
        self.unique
    }
}

/// `π(i) = max(ε, base(i) · λ^{n_c(i)})`.
pub fn profitability(i: ItemId, history: &RetrievalHistory, model: &ProfitabilityModel) -> f64 {
    let n_c = history.shared_count(i);
    let decayed = model.base[i] * model.lambda.powi(n_c as i32);
    decayed.max(model.epsilon)
}

/// Candidate distribution `q(j|i)`; both kinds put zero mass on `j = i`.
#[derive(Debug, Clone)]
pub enum Proposal {
    Uniform { n: usize },
    Softmax(TransitionMatrix),
}

impl Proposal {
    pub fn new(kind: ProposalKind, s: &SimilarityMatrix, temperature: f64) -> Result<Self> {
        if s.len() < 2 {
            return Err(Error::validation("a proposal needs at least 2 items"));
        }
        match kind {
            ProposalKind::Uniform => Ok(Proposal::Uniform { n: s.len() }),
            ProposalKind::Softmax => {
                let p = softmax_transition_matrix(s, temperature)?;
                if let Some((i, j)) = (0..p.len())
                    .flat_map(|i| (0..p.len()).map(move |j| (i, j)))
                    .find(|&(i, j)| i != j && !(p.prob(i, j) > 0.0))
                {
                    return Err(Error::Numeric(format!(
                        "softmax proposal underflows to zero for {i}→{j}; raise the temperature"
                    )));
                }
                Ok(Proposal::Softmax(p))
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Proposal::Uniform { n } => *n,
            Proposal::Softmax(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prob(&self, from: ItemId, to: ItemId) -> f64 {
        match self {
            Proposal::Uniform { n } => {
                if from == to {
                    0.0
                } else {
                    1.0 / (*n - 1) as f64
                }
            }
            Proposal::Softmax(p) => p.prob(from, to),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, Proposal::Uniform { .. })
    }

    pub fn sample(&self, from: ItemId, rng: &mut impl Rng) -> ItemId {
        let u: f64 = rng.gen();
        self.sample_with(from, u)
    }

    /// Inverse-CDF lookup over ascending item ids for `u ∈ [0, 1)`.
    pub fn sample_with(&self, from: ItemId, u: f64) -> ItemId {
        match self {
            Proposal::Uniform { n } => {
                let k = ((u * (*n - 1) as f64) as usize).min(*n - 2);
                if k >= from {
                    k + 1
                } else {
                    k
                }
            }
            Proposal::Softmax(p) => p.sample_with(from, u),
        }
    }

    /// `A(i→j) = min{1, π(j) q(i|j) / (π(i) q(j|i))}`.
    pub fn acceptance(&self, from: ItemId, to: ItemId, pi_from: f64, pi_to: f64) -> f64 {
        let ratio = if self.is_symmetric() {
            pi_to / pi_from
        } else {
            (pi_to * self.prob(to, from)) / (pi_from * self.prob(from, to))
        };
        ratio.min(1.0)
    }
}

/// Precomputed target model and proposal shared by all walks.
#[derive(Debug, Clone)]
pub struct MetropolisHastings {
    model: ProfitabilityModel,
    proposal: Proposal,
}

impl MetropolisHastings {
    pub fn new(s: &SimilarityMatrix, scheme: &CategoryScheme, cfg: &SamplerConfig) -> Result<Self> {
        let model = ProfitabilityModel::new(s, scheme, cfg.lambda, cfg.epsilon)?;
        let proposal = Proposal::new(cfg.proposal, s, cfg.temperature)?;
        Ok(MetropolisHastings { model, proposal })
    }

    pub fn from_parts(model: ProfitabilityModel, proposal: Proposal) -> Result<Self> {
        if model.len() != proposal.len() {
            return Err(Error::validation("model and proposal sizes differ"));
        }
        Ok(MetropolisHastings { model, proposal })
    }

    pub fn model(&self) -> &ProfitabilityModel {
        &self.model
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    /// Every step draws a proposal and an acceptance uniform, so the stream
    /// position depends only on the step count.
    pub fn walk(&self, start: ItemId, steps: usize, rng: &mut impl Rng) -> WalkTrace {
        assert!(start < self.model.len(), "start item {start} out of range");
        let mut history = self.model.history();
        let mut trace = Vec::with_capacity(steps);
        let mut rejected = Vec::new();
        let mut current = start;
        trace.push(current);
        history.record(current, &self.model);
        while trace.len() < steps {
            let candidate = self.proposal.sample(current, rng);
            let u: f64 = rng.gen();
            let pi_from = profitability(current, &history, &self.model);
            let pi_to = profitability(candidate, &history, &self.model);
            if u < self.proposal.acceptance(current, candidate, pi_from, pi_to) {
                current = candidate;
                history.record(current, &self.model);
            } else {
                rejected.push(trace.len());
            }
            trace.push(current);
        }
        WalkTrace {
            walk: 0,
            seed: 0,
            steps: trace,
            rejected,
        }
    }
}

/// Single MH walk built from scratch; see [`MetropolisHastings::walk`].
pub fn mh_walk(
    s: &SimilarityMatrix,
    scheme: &CategoryScheme,
    cfg: &SamplerConfig,
    start: ItemId,
    rng: &mut impl Rng,
) -> Result<WalkTrace> {
    cfg.validate()?;
    Ok(MetropolisHastings::new(s, scheme, cfg)?.walk(start, cfg.steps, rng))
}

/// Analytic MH kernel `K(i→j) = q(j|i) A(i→j)` for a static target, with the
/// rejected mass on the diagonal.
pub fn mh_kernel(target: &[f64], proposal: &Proposal) -> DenseMatrix {
    let n = target.len();
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut moved = 0.0;
        for j in 0..n {
            if i != j {
                let v = proposal.prob(i, j) * proposal.acceptance(i, j, target[i], target[j]);
                k.set(i, j, v);
                moved += v;
            }
        }
        k.set(i, i, 1.0 - moved);
    }
    k
}
