//! Asymptotic design quantities for a fixed anomaly set `A`.
//!
//! With `I*_A = min_{i∈A} I_i`, `I_A` the harmonic mean of `{I_i : i ∈ A}` and
//! `K̂_A = |A| I*_A / I_A = Σ_{i∈A} I*_A / I_i` (and `J*_A`, `J_A`, `Ǩ_A`
//! built the same way over `A^c` from the `J_j`), an asymptotically optimal
//! policy samples every `i ∈ A` with long-run frequency at least
//! `x_A I*_A / I_i` and every `j ∉ A` with at least `y_A J*_A / J_j`.
//! `(x_A, y_A)` solves a two-dimensional max-min problem whose solution is
//! available in closed form; [`levels`] implements that case analysis and
//! [`crate::oracle`] checks it numerically.
//!
//! `r` is the limiting ratio `|log α| / |log β|`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::problem::ProblemSpec;
use crate::set::SourceSet;
use crate::{Error, Result};

/// Minimum, harmonic mean and budget weight (`K̂` or `Ǩ`) of one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlSummary {
    pub star: f64,
    pub harmonic: f64,
    pub weight: f64,
}

fn summarize(values: impl Iterator<Item = f64>) -> Option<KlSummary> {
    let (mut star, mut count, mut inv) = (f64::INFINITY, 0usize, 0.0);
    for v in values {
        star = star.min(v);
        count += 1;
        inv += 1.0 / v;
    }
    (count > 0).then(|| KlSummary { star, harmonic: count as f64 / inv, weight: star * inv })
}

/// `(I*_A, I_A, K̂_A)`; undefined for `A = ∅`.
pub fn anomalous_summary(spec: &ProblemSpec, set: &SourceSet) -> Result<KlSummary> {
    spec.check_set(set)?;
    summarize(set.iter().map(|i| spec.kl()[i].anomalous)).ok_or(Error::UndefinedSummary("anomalous-side"))
}

/// `(J*_A, J_A, Ǩ_A)`; undefined for `A = [M]`.
pub fn normal_summary(spec: &ProblemSpec, set: &SourceSet) -> Result<KlSummary> {
    spec.check_set(set)?;
    summarize(set.complement(spec.sources()).map(|j| spec.kl()[j].normal)).ok_or(Error::UndefinedSummary("normal-side"))
}

/// Which branch of the case analysis produced `(x_A, y_A)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    /// `ℓ = u`, `K̂ ≤ θ Ǩ`: anomalous sources are filled first.
    KnownAnomalousFirst,
    /// `ℓ = u`, `K̂ > θ Ǩ`.
    KnownNormalFirst,
    /// `ℓ < |A| < u`.
    Interior,
    /// `|A| = ℓ < u` with `ℓ = 0` or `r ≤ 1`: only the normal side matters.
    LowerNormalOnly,
    /// `|A| = ℓ`, `r > 1`, both sides balanced along the budget line.
    LowerBalanced,
    /// `|A| = ℓ`, `r > 1`, anomalous side saturated at one.
    LowerSaturated,
    /// `|A| = ℓ`, `r > 1`, `K̂ > θ Ǩ`: the normal side is filled first.
    LowerNormalFirst,
    /// `ℓ < |A| = u` with `u = M` or `r ≥ 1`.
    UpperAnomalousOnly,
    UpperBalanced,
    /// `|A| = u`, `r < 1`, normal side saturated at one.
    UpperSaturated,
    /// `|A| = u`, `r < 1`, `θ Ǩ > K̂`: the anomalous side is filled first.
    UpperAnomalousFirst,
}

impl CaseLabel {
    pub fn name(self) -> &'static str {
        match self {
            CaseLabel::KnownAnomalousFirst => "known_anomalous_first",
            CaseLabel::KnownNormalFirst => "known_normal_first",
            CaseLabel::Interior => "interior",
            CaseLabel::LowerNormalOnly => "lower_normal_only",
            CaseLabel::LowerBalanced => "lower_balanced",
            CaseLabel::LowerSaturated => "lower_saturated",
            CaseLabel::LowerNormalFirst => "lower_normal_first",
            CaseLabel::UpperAnomalousOnly => "upper_anomalous_only",
            CaseLabel::UpperBalanced => "upper_balanced",
            CaseLabel::UpperSaturated => "upper_saturated",
            CaseLabel::UpperAnomalousFirst => "upper_anomalous_first",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where `|A|` sits relative to the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Position {
    Known,
    Interior,
    Lower,
    Upper,
}

/// Everything the case analysis needs about `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub size: usize,
    pub lower: usize,
    pub upper: usize,
    pub sources: usize,
    /// `K̂_A`, zero when `A = ∅`.
    pub k_hat: f64,
    /// `Ǩ_A`, zero when `A = [M]`.
    pub k_check: f64,
    /// `θ_A = I*_A / J*_A`; `None` when either side is empty.
    pub theta: Option<f64>,
}

impl Geometry {
    pub fn of(spec: &ProblemSpec, set: &SourceSet) -> Result<Self> {
        spec.check_set(set)?;
        let an = anomalous_summary(spec, set).ok();
        let no = normal_summary(spec, set).ok();
        Ok(Geometry {
            size: set.len(),
            lower: spec.lower(),
            upper: spec.upper(),
            sources: spec.sources(),
            k_hat: an.map_or(0.0, |s| s.weight),
            k_check: no.map_or(0.0, |s| s.weight),
            theta: an.zip(no).map(|(a, n)| a.star / n.star),
        })
    }

    pub fn position(&self) -> Position {
        if self.lower == self.upper {
            Position::Known
        } else if self.size == self.lower {
            Position::Lower
        } else if self.size == self.upper {
            Position::Upper
        } else {
            Position::Interior
        }
    }

    fn theta(&self) -> f64 {
        // every branch that reads θ has both sides non-empty
        self.theta.expect("θ is defined when both sides are non-empty")
    }
}

/// `(x_A, y_A)` and the branch that produced them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Levels {
    pub x: f64,
    pub y: f64,
    pub case: CaseLabel,
}

// Branch tests use a relative band so that boundary ties go to the first
// listed branch; both branches agree there anyway.
fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// Closed-form `(x_A, y_A)` for budget `budget` and exponent ratio `r`.
pub fn levels(g: &Geometry, r: f64, budget: f64) -> Levels {
    let (kh, kc, k) = (g.k_hat, g.k_check, budget);
    let lv = |x: f64, y: f64, case| Levels { x, y, case };
    match g.position() {
        Position::Known => {
            let th = g.theta();
            if le(kh, th * kc) {
                lv((k / kh).min(1.0), (pos(k - kh) / kc).min(1.0), CaseLabel::KnownAnomalousFirst)
            } else {
                lv((pos(k - kc) / kh).min(1.0), (k / kc).min(1.0), CaseLabel::KnownNormalFirst)
            }
        }
        Position::Interior => {
            let th = g.theta();
            let x = (k / (kh + th / r * kc)).min(r / th).min(1.0);
            let y = (k / (kc + r / th * kh)).min(th / r).min(1.0);
            lv(x, y, CaseLabel::Interior)
        }
        Position::Lower => {
            if g.size == 0 || le(r, 1.0) {
                return lv(0.0, (k / kc).min(1.0), CaseLabel::LowerNormalOnly);
            }
            let th = g.theta();
            let z = th / (r - 1.0);
            if le(kh, th * kc) {
                if z >= 1.0 || le(k, kh + z * kc) {
                    let x = (k / (kh + z * kc)).min(1.0 / z).min(1.0);
                    let y = (k / (kc + kh / z)).min(z).min(1.0);
                    lv(x, y, CaseLabel::LowerBalanced)
                } else {
                    lv(1.0, ((k - kh) / kc).min(1.0), CaseLabel::LowerSaturated)
                }
            } else {
                let x = (pos(k - kc) / kh).min(1.0).min(1.0 / z);
                lv(x, (k / kc).min(1.0), CaseLabel::LowerNormalFirst)
            }
        }
        Position::Upper => {
            if g.size == g.sources || le(1.0, r) {
                return lv((k / kh).min(1.0), 0.0, CaseLabel::UpperAnomalousOnly);
            }
            let th = g.theta();
            let w = (1.0 / th) / (1.0 / r - 1.0);
            if le(th * kc, kh) {
                if w >= 1.0 || le(k, kc + w * kh) {
                    let y = (k / (kc + w * kh)).min(1.0 / w).min(1.0);
                    let x = (k / (kh + kc / w)).min(w).min(1.0);
                    lv(x, y, CaseLabel::UpperBalanced)
                } else {
                    lv(((k - kc) / kh).min(1.0), 1.0, CaseLabel::UpperSaturated)
                }
            } else {
                let y = (pos(k - kh) / kc).min(1.0).min(1.0 / w);
                lv((k / kh).min(1.0), y, CaseLabel::UpperAnomalousFirst)
            }
        }
    }
}

/// `(x_A, y_A)` for the problem's budget.
pub fn xy(spec: &ProblemSpec, set: &SourceSet, r: f64) -> Result<Levels> {
    check_ratio(r)?;
    Ok(levels(&Geometry::of(spec, set)?, r, spec.budget()))
}

fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(alloc::format!("error-exponent ratio r = {r} must be positive")))
    }
}

/// All design quantities for one anomaly set.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticProfile {
    pub set: SourceSet,
    pub anomalous: Option<KlSummary>,
    pub normal: Option<KlSummary>,
    pub geometry: Geometry,
    pub r: f64,
    pub budget: f64,
    pub levels: Levels,
    /// Levels with every source sampled (`K = M`).
    pub full: Levels,
    /// Minimal long-run sampling frequency of each source.
    pub c_star: Vec<f64>,
    /// `Q_A = x_A(M) K̂_A + y_A(M) Ǩ_A`.
    pub q: f64,
}

impl AsymptoticProfile {
    pub fn new(spec: &ProblemSpec, set: &SourceSet, r: f64) -> Result<Self> {
        check_ratio(r)?;
        let geometry = Geometry::of(spec, set)?;
        let anomalous = anomalous_summary(spec, set).ok();
        let normal = normal_summary(spec, set).ok();
        let lv = levels(&geometry, r, spec.budget());
        let full = levels(&geometry, r, spec.sources() as f64);
        let mut c_star = vec![0.0; spec.sources()];
        for (i, c) in c_star.iter_mut().enumerate() {
            let kl = spec.kl()[i];
            *c = if set.contains(i) {
                lv.x * anomalous.map_or(0.0, |s| s.star) / kl.anomalous
            } else {
                lv.y * normal.map_or(0.0, |s| s.star) / kl.normal
            };
        }
        let q = full.x * geometry.k_hat + full.y * geometry.k_check;
        Ok(AsymptoticProfile {
            set: set.clone(),
            anomalous,
            normal,
            geometry,
            r,
            budget: spec.budget(),
            levels: lv,
            full,
            c_star,
            q,
        })
    }

    pub fn x(&self) -> f64 {
        self.levels.x
    }

    pub fn y(&self) -> f64 {
        self.levels.y
    }

    pub fn case(&self) -> CaseLabel {
        self.levels.case
    }

    pub fn theta(&self) -> Option<f64> {
        self.geometry.theta
    }

    /// `x K̂ + y Ǩ`, which equals `Σ c*_i`.
    pub fn budget_used(&self) -> f64 {
        self.levels.x * self.geometry.k_hat + self.levels.y * self.geometry.k_check
    }

    fn time_for(&self, lv: &Levels, log_alpha: f64, log_beta: f64) -> f64 {
        let ix = lv.x * self.anomalous.map_or(0.0, |s| s.star);
        let jy = lv.y * self.normal.map_or(0.0, |s| s.star);
        let g = &self.geometry;
        match g.position() {
            Position::Known => log_alpha.max(log_beta) / (ix + jy),
            Position::Interior => (log_alpha / ix).max(log_beta / jy),
            Position::Lower if g.size == 0 => log_beta / jy,
            Position::Lower => (log_beta / jy).max(log_alpha / (ix + jy)),
            Position::Upper if g.size == g.sources => log_alpha / ix,
            Position::Upper => (log_alpha / ix).max(log_beta / (ix + jy)),
        }
    }

    /// First-order approximation of the smallest achievable expected
    /// stopping time under `A`, for error targets `(α, β)`.
    ///
    /// The levels are those of the profile's `r`; pass targets with
    /// `|log α| / |log β| = r` for the approximation to be meaningful.
    pub fn optimal_time(&self, alpha: f64, beta: f64) -> f64 {
        self.time_for(&self.levels, -libm::log(alpha), -libm::log(beta))
    }

    /// Relative efficiency of round-robin sampling: `(M/K) T(M) / T(K)` where
    /// `T(·)` is the first-order optimal time as a function of the budget.
    pub fn are_tandem(&self) -> Result<f64> {
        let k = self.budget;
        if (k - libm::round(k)).abs() > 1e-9 {
            return Err(Error::UnsupportedRule(alloc::format!(
                "round-robin efficiency needs an integer budget, got K = {k}"
            )));
        }
        let m = self.geometry.sources as f64;
        let full = self.time_for(&self.full, self.r, 1.0);
        let this = self.time_for(&self.levels, self.r, 1.0);
        Ok(m / k * full / this)
    }
}
