use rand::Rng;

use super::{SamplerConfig, TransitionMatrix, WalkTrace};
use crate::vocabulary::ItemId;

/// Walk `cfg.steps` items starting at `start`, drawing each move from the
/// current row of `p`. The returned trace carries walk index 0 and seed 0;
/// [`super::simulate`] fills them in.
pub fn random_walk(
    p: &TransitionMatrix,
    start: ItemId,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> WalkTrace {
    assert!(start < p.len(), "start item {start} out of range");
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut current = start;
    steps.push(current);
    while steps.len() < cfg.steps {
        current = p.sample(current, rng);
        steps.push(current);
    }
    WalkTrace {
        walk: 0,
        seed: 0,
        steps,
        rejected: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::samplers::{rng_from_seed, softmax_transition_matrix, DiagonalPolicy};
    use crate::similarity::SimilarityMatrix;

    fn cfg(steps: usize) -> SamplerConfig {
        SamplerConfig {
            steps,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn deterministic_two_state_chain() {
        let p = TransitionMatrix::row_normalized(
            &DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]),
            DiagonalPolicy::Exclude,
        )
        .unwrap();
        let t = random_walk(&p, 0, &cfg(4), &mut rng_from_seed(1));
        assert_eq!(t.steps, vec![0, 1, 0, 1]);
    }

    #[test]
    fn same_seed_same_trace() {
        let s = SimilarityMatrix::from_matrix(DenseMatrix::from_rows(&[
            [1.0, 0.5, 0.2, 0.1],
            [0.5, 1.0, 0.3, 0.4],
            [0.2, 0.3, 1.0, 0.6],
            [0.1, 0.4, 0.6, 1.0],
        ]))
        .unwrap();
        let p = softmax_transition_matrix(&s, 0.2).unwrap();
        let a = random_walk(&p, 2, &cfg(500), &mut rng_from_seed(42));
        let b = random_walk(&p, 2, &cfg(500), &mut rng_from_seed(42));
        assert_eq!(a, b);
        assert_eq!(a.steps[0], 2);
        assert!(a.steps.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn empirical_transitions_match_rows() {
        let s = SimilarityMatrix::from_matrix(DenseMatrix::from_rows(&[
            [1.0, 0.8, 0.3],
            [0.8, 1.0, 0.5],
            [0.3, 0.5, 1.0],
        ]))
        .unwrap();
        let p = softmax_transition_matrix(&s, 0.5).unwrap();
        let t = random_walk(&p, 0, &cfg(1_000_000), &mut rng_from_seed(7));
        let mut counts = [[0u64; 3]; 3];
        for w in t.steps.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            let l1: f64 = (0..3)
                .map(|j| (row[j] as f64 / total as f64 - p.prob(i, j)).abs())
                .sum();
            assert!(l1 <= 0.01, "row {i}: L1 {l1}");
        }
    }
}
