use std::collections::VecDeque;

use serde::Serialize;

use super::{MatrixOrigin, TransitionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the final iteration.
    pub residual: f64,
    pub origin: MatrixOrigin,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the support graph seen from state 0: the gcd of
/// `level(u) + 1 − level(v)` over reachable edges, with BFS levels.
/// Exact for irreducible chains.
pub fn support_period(p: &TransitionMatrix) -> usize {
    let n = p.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for (v, &w) in p.row(u).iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    period.max(1)
}

fn step(p: &TransitionMatrix, current: &[f64], next: &mut [f64]) -> f64 {
    let n = current.len();
    next.iter_mut().for_each(|v| *v = 0.0);
    for (i, &mass) in current.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (out, &pij) in next.iter_mut().zip(p.row(i)) {
            *out += mass * pij;
        }
    }
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= total);
    (0..n).map(|k| (next[k] - current[k]).abs()).sum()
}

fn iterate(p: &TransitionMatrix, start: Vec<f64>, tol: f64, max_iters: usize) -> (Vec<f64>, usize, f64, bool) {
    let mut current = start;
    let mut next = vec![0.0; current.len()];
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        residual = step(p, &current, &mut next);
        std::mem::swap(&mut current, &mut next);
        if residual <= tol {
            return (current, k, residual, true);
        }
    }
    (current, max_iters, residual, false)
}

/// Power iteration `p_{k+1} = p_k P` from the uniform vector until the L1
/// change drops to `tol`.
///
/// A uniform start can sit exactly on the fixed point of a periodic chain
/// (any doubly stochastic permutation, for instance) even though `p_k` has no
/// limit from a generic start. When the support graph has period > 1 the
/// iteration is re-run from a point mass on state 0 and the chain is reported
/// as non-convergent unless that run also settles.
pub fn stationary_distribution(
    p: &TransitionMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<StationaryDistribution> {
    if !(tol > 0.0) || max_iters == 0 {
        return Err(Error::validation("power iteration needs tol > 0 and max_iters ≥ 1"));
    }
    if p.max_row_sum_error() > 1e-9 {
        return Err(Error::validation("power iteration needs a row-stochastic matrix"));
    }
    let n = p.len();
    let (probabilities, iterations, residual, converged) = iterate(p, vec![1.0 / n as f64; n], tol, max_iters);
    let period = support_period(p);
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual,
            period,
        });
    }
    if period > 1 {
        let mut point = vec![0.0; n];
        point[0] = 1.0;
        let (_, probe_iters, probe_residual, probe_converged) = iterate(p, point, tol, max_iters);
        if !probe_converged {
            return Err(Error::NonConvergence {
                iterations: probe_iters,
                residual: probe_residual,
                period,
            });
        }
    }
    Ok(StationaryDistribution {
        probabilities,
        iterations,
        residual,
        origin: p.origin(),
    })
}
