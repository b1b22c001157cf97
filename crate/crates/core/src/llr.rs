//! Running local log-likelihood ratios.
//!
//! Only sampled sources accumulate: `Λ_i(n) = Σ_{m ≤ n} g_i(X_i(m)) R_i(m)`.
//! Ranks are one-based, `Λ_(1) ≥ Λ_(2) ≥ ... ≥ Λ_(M)`, with `Λ_(0) = +∞`
//! and `Λ_(M+1) = −∞`. Equal values are ranked by source index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::set::SourceSet;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct LlrState {
    n: usize,
    lambda: Vec<f64>,
    counts: Vec<u64>,
    order: Vec<usize>,
    positive: usize,
    // stamp[i] == epoch marks a source already seen by the current update
    stamp: Vec<u64>,
    epoch: u64,
}

impl LlrState {
    pub fn new(m: usize) -> Self {
        LlrState {
            n: 0,
            lambda: vec![0.0; m],
            counts: vec![0; m],
            order: (0..m).collect(),
            positive: 0,
            stamp: vec![0; m],
            epoch: 0,
        }
    }

    /// Advance from time `n` to `n + 1` with one increment per sampled source.
    ///
    /// Nothing is modified when the call fails.
    pub fn update(&mut self, increments: &[(usize, f64)]) -> Result<()> {
        let m = self.lambda.len();
        self.epoch += 1;
        let epoch = self.epoch;
        for &(i, g) in increments {
            if i >= m {
                return Err(Error::Contract(format!("source {} out of range for M = {m}", i + 1)));
            }
            if self.stamp[i] == epoch {
                return Err(Error::Contract(format!("source {} sampled twice in one step", i + 1)));
            }
            if !g.is_finite() {
                return Err(Error::Contract(format!("non-finite increment {g} for source {}", i + 1)));
            }
            self.stamp[i] = epoch;
        }
        for &(i, g) in increments {
            self.lambda[i] += g;
            self.counts[i] += 1;
        }
        self.n += 1;
        if !increments.is_empty() {
            self.reorder();
        }
        Ok(())
    }

    fn reorder(&mut self) {
        let lambda = &self.lambda;
        // Mostly sorted already, which the stable sort exploits.
        self.order.sort_by(|&i, &j| rank_cmp(lambda, i, j));
        self.positive = lambda.iter().filter(|&&l| l > 0.0).count();
    }

    /// Number of completed time steps.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `N_i(n)`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_samples(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `π_i(n) = N_i(n) / n`, zero before the first step.
    pub fn proportion(&self, i: usize) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.counts[i] as f64 / self.n as f64
        }
    }

    /// Source indices ordered by non-increasing LLR.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `p(n) = #{i : Λ_i(n) > 0}`.
    pub fn positive_count(&self) -> usize {
        self.positive
    }

    /// `Λ_(k)` for `k ∈ 0..=M+1`, sentinels included.
    pub fn ranked(&self, k: usize) -> Result<f64> {
        let m = self.lambda.len();
        match k {
            0 => Ok(f64::INFINITY),
            k if k <= m => Ok(self.lambda[self.order[k - 1]]),
            k if k == m + 1 => Ok(f64::NEG_INFINITY),
            _ => Err(Error::Contract(format!("rank {k} outside 0..={}", m + 1))),
        }
    }

    /// `Λ_(k) − Λ_(k+1)` for `k ∈ 0..=M`; `+∞` at either end.
    pub fn gap_at(&self, k: usize) -> Result<f64> {
        let m = self.lambda.len();
        if k > m {
            return Err(Error::Contract(format!("rank {k} outside 0..={m}")));
        }
        if k == 0 || k == m {
            return Ok(f64::INFINITY);
        }
        Ok(self.ranked(k)? - self.ranked(k + 1)?)
    }

    /// `Λ_i − Λ_j`.
    pub fn pairwise_llr(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::Contract(format!("pairwise LLR of source {} with itself", i + 1)));
        }
        let m = self.lambda.len();
        if i >= m || j >= m {
            return Err(Error::Contract(format!("source index out of range for M = {m}")));
        }
        Ok(self.lambda[i] - self.lambda[j])
    }

    /// The `k` highest-ranked sources.
    pub fn top(&self, k: usize) -> SourceSet {
        SourceSet::new(self.order[..k.min(self.order.len())].iter().copied())
    }
}

fn rank_cmp(lambda: &[f64], i: usize, j: usize) -> Ordering {
    lambda[j].total_cmp(&lambda[i]).then(i.cmp(&j))
}

/// First (one-based) index from which every decision in `trace` equals
/// `truth`; `None` when the last decision is wrong or the trace is empty.
pub fn consistency_time(trace: &[SourceSet], truth: &SourceSet) -> Option<usize> {
    match trace.iter().rposition(|d| d != truth) {
        None if trace.is_empty() => None,
        None => Some(1),
        Some(last) if last + 1 == trace.len() => None,
        Some(last) => Some(last + 2),
    }
}
