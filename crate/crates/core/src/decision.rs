//! Stopping and decision rules.
//!
//! Three variants, chosen by the bounds `(ℓ, u)`:
//!
//! * known count (`ℓ = u`): stop once the gap between the `ℓ`-th and
//!   `(ℓ+1)`-th largest LLR reaches `c`; declare the `ℓ` largest.
//! * unbounded (`ℓ = 0`, `u = M`): stop once every LLR is outside `(−a, b)`;
//!   declare the positive ones.
//! * bounded: stop on any of three branches (see [`should_stop`]); declare the
//!   `clamp(p, ℓ, u)` largest, `p` being the number of positive LLRs.

use alloc::format;

use crate::llr::LlrState;
use crate::problem::ProblemSpec;
use crate::set::SourceSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoppingVariant {
    KnownCount,
    Unbounded,
    Bounded,
}

impl StoppingVariant {
    pub fn name(self) -> &'static str {
        match self {
            StoppingVariant::KnownCount => "known_count",
            StoppingVariant::Unbounded => "unbounded",
            StoppingVariant::Bounded => "bounded",
        }
    }
}

/// Thresholds in nats. The base values are multiplied by `scale` when used.
///
/// The known-count variant only reads `c`, the unbounded one `a` and `b`;
/// unused entries are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub variant: StoppingVariant,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    scale: f64,
}

impl Thresholds {
    pub fn new(variant: StoppingVariant, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let used: &[f64] = match variant {
            StoppingVariant::KnownCount => &[c],
            StoppingVariant::Unbounded => &[a, b],
            StoppingVariant::Bounded => &[a, b, c, d],
        };
        if used.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Contract(format!("thresholds must be positive, got a={a} b={b} c={c} d={d}")));
        }
        Ok(Thresholds { variant, a, b, c, d, scale: 1.0 })
    }

    /// Same geometry, every threshold multiplied by `scale`.
    pub fn scaled(self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Contract(format!("threshold scale {scale} must be positive")));
        }
        Ok(Thresholds { scale, ..self })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn a(&self) -> f64 {
        self.a * self.scale
    }

    pub fn b(&self) -> f64 {
        self.b * self.scale
    }

    pub fn c(&self) -> f64 {
        self.c * self.scale
    }

    pub fn d(&self) -> f64 {
        self.d * self.scale
    }
}

/// Thresholds that keep both familywise error rates below their targets
/// for any sampling rule.
///
/// With `ℓ = u`: `c = |log(α∧β)| + log(ℓ(M−ℓ))`. Otherwise
/// `a = |log β| + log M`, `b = |log α| + log M`,
/// `c = |log α| + log((M−ℓ)M)`, `d = |log β| + log(uM)`.
pub fn conservative_thresholds(spec: &ProblemSpec) -> Thresholds {
    let m = spec.sources() as f64;
    let (l, u) = (spec.lower() as f64, spec.upper() as f64);
    let la = -libm::log(spec.alpha());
    let lb = -libm::log(spec.beta());
    let variant = spec.variant();
    let t = match variant {
        StoppingVariant::KnownCount => {
            let c = la.max(lb) + libm::log(l * (m - l));
            Thresholds::new(variant, 0.0, 0.0, c, 0.0)
        }
        StoppingVariant::Unbounded | StoppingVariant::Bounded => {
            let lm = libm::log(m);
            let (c, d) = match variant {
                StoppingVariant::Bounded => (la + libm::log((m - l) * m), lb + libm::log(u * m)),
                _ => (0.0, 0.0),
            };
            Thresholds::new(variant, lb + lm, la + lm, c, d)
        }
    };
    // every term is a positive log plus a non-negative one
    t.expect("conservative thresholds are positive")
}

fn all_outside(state: &LlrState, a: f64, b: f64) -> bool {
    state.lambda().iter().all(|&l| l <= -a || l >= b)
}

/// Whether the variant's stopping condition holds at the current time.
///
/// The bounded variant stops when any of these holds:
/// 1. `Λ_(ℓ+1) ≤ −a` and `Λ_(ℓ) − Λ_(ℓ+1) ≥ c`;
/// 2. `ℓ ≤ p ≤ u` and no `Λ_i` lies in the open interval `(−a, b)`;
/// 3. `Λ_(u) ≥ b` and `Λ_(u) − Λ_(u+1) ≥ d`.
pub fn should_stop(state: &LlrState, th: &Thresholds, spec: &ProblemSpec) -> bool {
    let (l, u) = (spec.lower(), spec.upper());
    // ranks below are all within 0..=M+1 for a state built for this spec
    let rank = |k| state.ranked(k).expect("rank in range");
    let gap = |k| state.gap_at(k).expect("rank in range");
    match th.variant {
        StoppingVariant::KnownCount => gap(l) >= th.c(),
        StoppingVariant::Unbounded => all_outside(state, th.a(), th.b()),
        StoppingVariant::Bounded => {
            let p = state.positive_count();
            (rank(l + 1) <= -th.a() && gap(l) >= th.c())
                || ((l..=u).contains(&p) && all_outside(state, th.a(), th.b()))
                || (rank(u) >= th.b() && gap(u) >= th.d())
        }
    }
}

/// Number of sources declared anomalous: `p` clamped to `[ℓ, u]`.
pub fn decision_size(state: &LlrState, spec: &ProblemSpec) -> usize {
    state.positive_count().clamp(spec.lower(), spec.upper())
}

/// The current decision set: the `clamp(p, ℓ, u)` largest LLRs. This single
/// rule covers all three variants.
pub fn decide(state: &LlrState, spec: &ProblemSpec) -> SourceSet {
    state.top(decision_size(state, spec))
}

/// [`decide`] into an existing set, reusing its allocation.
pub fn decide_into(state: &LlrState, spec: &ProblemSpec, out: &mut SourceSet) {
    out.assign(&state.order()[..decision_size(state, spec)]);
}
