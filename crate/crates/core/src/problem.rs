use alloc::format;
use alloc::vec::Vec;

use crate::decision::StoppingVariant;
use crate::model::{KlPair, SourceModel};
use crate::set::SourceSet;
use crate::{Error, Result};

/// `(M, ℓ, u, K, α, β)` plus the `M` source models.
///
/// Invariants checked on construction: `0 ≤ ℓ ≤ u ≤ M`, `0 < ℓ < M` when
/// `ℓ = u`, `K ∈ (0, M]`, `α, β ∈ (0, 1)` and positive finite KL numbers for
/// every source.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    models: Vec<SourceModel>,
    kl: Vec<KlPair>,
    lower: usize,
    upper: usize,
    budget: f64,
    alpha: f64,
    beta: f64,
}

impl ProblemSpec {
    pub fn new(
        models: Vec<SourceModel>,
        lower: usize,
        upper: usize,
        budget: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let m = models.len();
        if m == 0 {
            return Err(Error::InvalidProblem("at least one source is required".into()));
        }
        if lower > upper {
            return Err(Error::InvalidProblem(format!("ℓ ≤ u violated (ℓ = {lower}, u = {upper})")));
        }
        if upper > m {
            return Err(Error::InvalidProblem(format!("u ≤ M violated (u = {upper}, M = {m})")));
        }
        if lower == upper && (lower == 0 || lower == m) {
            return Err(Error::InvalidProblem(format!("ℓ = u requires 0 < ℓ < M (ℓ = u = {lower}, M = {m})")));
        }
        if !(budget > 0.0 && budget <= m as f64) {
            return Err(Error::InvalidProblem(format!("K ∈ (0, M] violated (K = {budget}, M = {m})")));
        }
        for (name, v) in [("α", alpha), ("β", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidProblem(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        let kl = models.iter().map(SourceModel::kl_numbers).collect::<Result<Vec<_>>>()?;
        Ok(ProblemSpec { models, kl, lower, upper, budget, alpha, beta })
    }

    /// All sources `N(0,1)` vs `N(mean,1)`.
    pub fn homogeneous_gaussian(
        m: usize,
        lower: usize,
        upper: usize,
        budget: f64,
        alpha: f64,
        beta: f64,
        mean: f64,
    ) -> Result<Self> {
        let models = (0..m).map(|_| SourceModel::gaussian(mean)).collect::<Result<Vec<_>>>()?;
        Self::new(models, lower, upper, budget, alpha, beta)
    }

    /// Two-level Gaussian preset: sources in the first half have mean shift
    /// `mean`, those in the second half `2 * mean`, so the KL numbers of the
    /// second half are four times larger (`φ = 0.25`). `m` must be even.
    pub fn heterogeneous_gaussian(
        m: usize,
        lower: usize,
        upper: usize,
        budget: f64,
        alpha: f64,
        beta: f64,
        mean: f64,
    ) -> Result<Self> {
        if !m.is_multiple_of(2) {
            return Err(Error::InvalidProblem(format!("heterogeneous preset needs an even M, got {m}")));
        }
        let models = (0..m)
            .map(|i| SourceModel::gaussian(if i < m / 2 { mean } else { 2.0 * mean }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(models, lower, upper, budget, alpha, beta)
    }

    /// Same sources and bounds, different error targets.
    pub fn with_error_targets(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(self.models.clone(), self.lower, self.upper, self.budget, alpha, beta)
    }

    /// Same sources and error targets, different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.models.clone(), self.lower, self.upper, budget, self.alpha, self.beta)
    }

    pub fn sources(&self) -> usize {
        self.models.len()
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `Some(K)` when the budget is a whole number of sources.
    pub fn integer_budget(&self) -> Option<usize> {
        let k = libm::round(self.budget);
        ((self.budget - k).abs() < 1e-9).then_some(k as usize)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn models(&self) -> &[SourceModel] {
        &self.models
    }

    pub fn kl(&self) -> &[KlPair] {
        &self.kl
    }

    /// Pre-limit surrogate for the error-exponent ratio: `|log α| / |log β|`.
    pub fn error_ratio(&self) -> f64 {
        libm::log(self.alpha) / libm::log(self.beta)
    }

    pub fn variant(&self) -> StoppingVariant {
        if self.lower == self.upper {
            StoppingVariant::KnownCount
        } else if self.lower == 0 && self.upper == self.sources() {
            StoppingVariant::Unbounded
        } else {
            StoppingVariant::Bounded
        }
    }

    /// Whether `set` is a candidate anomaly set (`ℓ ≤ |A| ≤ u`, indices < M).
    pub fn admits(&self, set: &SourceSet) -> bool {
        (self.lower..=self.upper).contains(&set.len()) && set.max_index().is_none_or(|i| i < self.sources())
    }

    pub fn check_set(&self, set: &SourceSet) -> Result<()> {
        if self.admits(set) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "set {{{set}}} is not a candidate anomaly set (ℓ = {}, u = {}, M = {})",
                self.lower,
                self.upper,
                self.sources()
            )))
        }
    }

    /// `|P_{ℓ,u}|`, saturating.
    pub fn candidate_count(&self) -> u128 {
        let m = self.sources() as u128;
        let mut total: u128 = 0;
        let mut binom: u128 = 1; // C(m, 0)
        for k in 0..=self.upper as u128 {
            if k >= self.lower as u128 {
                total = total.saturating_add(binom);
            }
            binom = binom.saturating_mul(m - k) / (k + 1);
        }
        total
    }

    /// Whether every source has the same `(I, J)`.
    pub fn is_homogeneous(&self) -> bool {
        let first = self.kl[0];
        self.kl.iter().all(|k| {
            (k.anomalous - first.anomalous).abs() <= 1e-12 * first.anomalous
                && (k.normal - first.normal).abs() <= 1e-12 * first.normal
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homog(m: usize, l: usize, u: usize, k: f64) -> Result<ProblemSpec> {
        ProblemSpec::homogeneous_gaussian(m, l, u, k, 1e-3, 1e-3, 0.5)
    }

    #[test]
    fn validation() {
        assert!(homog(10, 1, 6, 5.0).is_ok());
        assert!(matches!(homog(10, 3, 2, 5.0), Err(Error::InvalidProblem(_))));
        assert!(homog(10, 0, 0, 5.0).is_err());
        assert!(homog(10, 10, 10, 5.0).is_err());
        assert!(homog(10, 0, 10, 0.0).is_err());
        assert!(homog(10, 0, 10, 10.5).is_err());
        assert!(homog(10, 2, 11, 1.0).is_err());
        assert!(ProblemSpec::homogeneous_gaussian(4, 1, 2, 1.0, 0.0, 0.1, 1.0).is_err());
        assert!(ProblemSpec::heterogeneous_gaussian(5, 1, 2, 1.0, 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn variants_and_counts() {
        assert_eq!(homog(10, 2, 2, 5.0).unwrap().variant(), StoppingVariant::KnownCount);
        assert_eq!(homog(10, 0, 10, 5.0).unwrap().variant(), StoppingVariant::Unbounded);
        assert_eq!(homog(10, 1, 6, 5.0).unwrap().variant(), StoppingVariant::Bounded);
        assert_eq!(homog(10, 0, 10, 5.0).unwrap().candidate_count(), 1024);
        // C(10,1..6) = 10 + 45 + 120 + 210 + 252 + 210
        assert_eq!(homog(10, 1, 6, 5.0).unwrap().candidate_count(), 847);
        assert_eq!(homog(6, 2, 4, 5.0).unwrap().candidate_count(), 15 + 20 + 15);
    }

    #[test]
    fn heterogeneous_preset_has_quartered_phi() {
        let p = ProblemSpec::heterogeneous_gaussian(10, 1, 6, 5.0, 1e-3, 1e-3, 0.5).unwrap();
        assert_eq!(p.kl()[0].anomalous, 0.125);
        assert_eq!(p.kl()[9].anomalous, 0.5);
        assert!(!p.is_homogeneous());
        assert!(homog(4, 1, 2, 1.0).unwrap().is_homogeneous());
    }
}
