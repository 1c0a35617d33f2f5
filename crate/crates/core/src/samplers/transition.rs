use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::similarity::SimilarityMatrix;
use crate::vocabulary::ItemId;

/// Whether self-transitions carry mass.
///
/// Walks always use `Exclude`: with a unit diagonal and a small temperature
/// the self term would take nearly all of the row. `Include` exists for
/// oracle chains whose stationary distribution is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    Exclude,
    Include,
}

/// What a transition matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixOrigin {
    Softmax { temperature: f64 },
    RowNormalized { diagonal: DiagonalPolicy },
}

/// Row-stochastic `P(j|i)` with per-row cumulative sums for inverse-CDF draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    probs: DenseMatrix,
    cumulative: DenseMatrix,
    origin: MatrixOrigin,
}

impl TransitionMatrix {
    fn build(probs: DenseMatrix, origin: MatrixOrigin) -> Self {
        let mut cumulative = probs.clone();
        for row in cumulative.rows_mut() {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        TransitionMatrix {
            probs,
            cumulative,
            origin,
        }
    }

    /// Divide each row of a nonnegative weight matrix by its sum.
    pub fn row_normalized(weights: &DenseMatrix, diagonal: DiagonalPolicy) -> Result<Self> {
        if !weights.is_square() || weights.rows() == 0 {
            return Err(Error::validation("transition weights must be square and non-empty"));
        }
        let mut probs = weights.clone();
        for (i, row) in probs.rows_mut().enumerate() {
            if diagonal == DiagonalPolicy::Exclude {
                row[i] = 0.0;
            }
            if let Some(j) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation(format!(
                    "transition weight ({i},{j}) = {} is negative or non-finite",
                    row[j]
                )));
            }
            let total: f64 = row.iter().sum();
            if !(total > 0.0) {
                return Err(Error::validation(format!("row {i} has no outgoing mass")));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self::build(probs, MatrixOrigin::RowNormalized { diagonal }))
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    #[inline]
    pub fn prob(&self, from: ItemId, to: ItemId) -> f64 {
        self.probs.get(from, to)
    }

    pub fn row(&self, i: ItemId) -> &[f64] {
        self.probs.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.probs
    }

    pub fn origin(&self) -> MatrixOrigin {
        self.origin
    }

    /// Inverse-CDF draw from row `from` over ascending item ids.
    pub fn sample(&self, from: ItemId, rng: &mut impl Rng) -> ItemId {
        let u: f64 = rng.gen();
        self.sample_with(from, u)
    }

    /// Inverse-CDF lookup for a given `u ∈ [0, 1)`; never returns a zero-mass item.
    pub fn sample_with(&self, from: ItemId, u: f64) -> ItemId {
        let cdf = self.cumulative.row(from);
        let total = cdf[cdf.len() - 1];
        let target = u * total;
        let k = cdf.partition_point(|&c| c <= target);
        if k < cdf.len() {
            k
        } else {
            // rounding at the top of the row: last item with mass
            let p = self.probs.row(from);
            p.iter().rposition(|&v| v > 0.0).unwrap_or(cdf.len() - 1)
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.probs
            .row_iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `P(j|i) = exp(sim(i,j)/T) / Σ_{k≠i} exp(sim(i,k)/T)`, with `P(i|i) = 0`.
///
/// Each row subtracts its largest off-diagonal logit before exponentiating.
pub fn softmax_transition_matrix(s: &SimilarityMatrix, temperature: f64) -> Result<TransitionMatrix> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::validation(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n = s.len();
    if n < 2 {
        return Err(Error::validation("softmax transitions need at least 2 items"));
    }
    let mut probs = DenseMatrix::zeros(n, n);
    for (i, out) in probs.rows_mut().enumerate() {
        let sims = s.row(i);
        let max = sims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v / temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if j == i {
                0.0
            } else {
                (sims[j] / temperature - max).exp()
            };
            total += *slot;
        }
        out.iter_mut().for_each(|v| *v /= total);
    }
    Ok(TransitionMatrix::build(probs, MatrixOrigin::Softmax { temperature }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn similarity(rows: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix::from_matrix(DenseMatrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn equal_candidates_split_evenly() {
        let s = similarity(&[&[1.0, 0.3, 0.3], &[0.3, 1.0, 0.2], &[0.3, 0.2, 1.0]]);
        let p = softmax_transition_matrix(&s, 0.027).unwrap();
        assert_eq!(p.prob(0, 0), 0.0);
        assert!((p.prob(0, 1) - 0.5).abs() < 1e-15);
        assert!((p.prob(0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_term_softmax_at_paper_temperature() {
        // 1/(1+e^{-x}) with x = 0.4/0.027, evaluated as 1 - e^{-x}/(1+e^{-x})
        let x: f64 = 0.4 / 0.027;
        let tail = (-x).exp() / (1.0 + (-x).exp());
        assert!((tail - 3.68e-7).abs() < 0.01e-7);
        let s = similarity(&[&[1.0, 0.9, 0.5], &[0.9, 1.0, 0.1], &[0.5, 0.1, 1.0]]);
        let p = softmax_transition_matrix(&s, 0.027).unwrap();
        assert!((p.prob(0, 1) - (1.0 - tail)).abs() < 1e-15);
        assert!((p.prob(0, 2) - tail).abs() / tail < 1e-9);
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let s = similarity(&[
            &[1.0, 0.9, -0.5, 0.1],
            &[0.9, 1.0, 0.2, 0.3],
            &[-0.5, 0.2, 1.0, 0.0],
            &[0.1, 0.3, 0.0, 1.0],
        ]);
        let p = softmax_transition_matrix(&s, 1e6).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { 1.0 / 3.0 };
                assert!((p.prob(i, j) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tiny_temperature_does_not_overflow() {
        let s = similarity(&[&[1.0, -1.0, 0.99], &[-1.0, 1.0, 0.0], &[0.99, 0.0, 1.0]]);
        let p = softmax_transition_matrix(&s, 1e-3).unwrap();
        assert!(p.matrix().as_slice().iter().all(|v| v.is_finite()));
        assert!(p.prob(0, 2) >= 1.0 - 1e-6);
        assert!(p.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn rejects_bad_temperature() {
        let s = similarity(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(softmax_transition_matrix(&s, 0.0).is_err());
        assert!(softmax_transition_matrix(&s, f64::NAN).is_err());
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        let p = TransitionMatrix::row_normalized(
            &DenseMatrix::from_rows(&[[0.0, 1.0, 0.0, 1.0], [1.0; 4], [1.0; 4], [1.0; 4]]),
            DiagonalPolicy::Include,
        )
        .unwrap();
        assert_eq!(p.sample_with(0, 0.0), 1);
        assert_eq!(p.sample_with(0, 0.4999), 1);
        assert_eq!(p.sample_with(0, 0.5), 3);
        assert_eq!(p.sample_with(0, 0.999_999_999), 3);
    }

    #[test]
    fn row_normalization_policies() {
        let w = DenseMatrix::from_rows(&[[0.9, 0.1], [0.2, 0.8]]);
        let inc = TransitionMatrix::row_normalized(&w, DiagonalPolicy::Include).unwrap();
        assert_eq!(inc.prob(0, 0), 0.9);
        let exc = TransitionMatrix::row_normalized(&w, DiagonalPolicy::Exclude).unwrap();
        assert_eq!(exc.row(0), &[0.0, 1.0]);
        let neg = DenseMatrix::from_rows(&[[1.0, -0.1], [0.2, 0.8]]);
        assert!(TransitionMatrix::row_normalized(&neg, DiagonalPolicy::Include).is_err());
        assert!(TransitionMatrix::row_normalized(
            &DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]),
            DiagonalPolicy::Exclude
        )
        .is_err());
    }

    fn similarity_strategy() -> impl Strategy<Value = SimilarityMatrix> {
        (2usize..7).prop_flat_map(|n| {
            prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |raw| {
                let mut m = DenseMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let v = if i == j { 1.0 } else { raw[i.min(j) * n + i.max(j)] };
                        m.set(i, j, v);
                    }
                }
                SimilarityMatrix::from_matrix(m).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(s in similarity_strategy(), t in 1e-3f64..10.0) {
            let p = softmax_transition_matrix(&s, t).unwrap();
            prop_assert!(p.max_row_sum_error() <= 1e-12);
            for i in 0..s.len() {
                prop_assert_eq!(p.prob(i, i), 0.0);
                prop_assert!(p.row(i).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn monotone_in_similarity(s in similarity_strategy(), t in 0.01f64..2.0) {
            let p = softmax_transition_matrix(&s, t).unwrap();
            let n = s.len();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if i != j && i != k && s.get(i, j) > s.get(i, k) + 1e-9 {
                            prop_assert!(p.prob(i, j) > p.prob(i, k));
                        }
                    }
                }
            }
        }
    }
}
