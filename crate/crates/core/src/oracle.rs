//! Numerical max-min solver for `(x_A, y_A)`, used to cross-check the closed
//! forms in [`crate::theory`].
//!
//! Restricted to frequencies of the form `c_i = p I*/I_i` on `A` and
//! `c_j = q J*/J_j` off `A`, the design problem becomes: maximize `f(p, q)`
//! over `p, q ∈ [0, 1]` with `p K̂ + q Ǩ ≤ K`, where `f` depends on where
//! `|A|` sits relative to `(ℓ, u)`:
//!
//! | position       | `f(p, q)`                      |
//! |----------------|--------------------------------|
//! | `ℓ = u`        | `p I* + q J*`                  |
//! | `ℓ < |A| < u`  | `min(p I*, r q J*)`            |
//! | `|A| = ℓ > 0`  | `min(r q J*, p I* + q J*)`     |
//! | `|A| = u < M`  | `min(p I*, r (p I* + q J*))`   |
//!
//! with the single remaining term when one side is empty. `f` is
//! non-decreasing in `q`, so the optimum sits on `q = q_max(p)` and
//! `F(p) = f(p, q_max(p))` is concave. `F` is scanned on a grid of the given
//! resolution and the best cell is refined by golden-section search. Ties
//! follow the closed forms: among optimal points the smallest `q` is
//! returned, and the smallest `p` for that `q`. At `|A| = u` the roles swap
//! (smallest `p` first).

use alloc::format;

use crate::problem::ProblemSpec;
use crate::set::SourceSet;
use crate::theory::{anomalous_summary, normal_summary, Geometry, Position};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSolution {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

struct Design {
    position: Position,
    k_hat: f64,
    k_check: f64,
    i_star: f64,
    j_star: f64,
    r: f64,
    budget: f64,
}

impl Design {
    fn objective(&self, p: f64, q: f64) -> f64 {
        let (ip, jq) = (p * self.i_star, q * self.j_star);
        match self.position {
            Position::Known => ip + jq,
            Position::Interior => ip.min(self.r * jq),
            Position::Lower if self.k_hat == 0.0 => jq,
            Position::Lower => (self.r * jq).min(ip + jq),
            Position::Upper if self.k_check == 0.0 => ip,
            Position::Upper => ip.min(self.r * (ip + jq)),
        }
    }

    fn p_max(&self) -> f64 {
        if self.k_hat == 0.0 {
            0.0
        } else {
            (self.budget / self.k_hat).min(1.0)
        }
    }

    fn q_max(&self, p: f64) -> f64 {
        if self.k_check == 0.0 {
            0.0
        } else {
            ((self.budget - p * self.k_hat).max(0.0) / self.k_check).min(1.0)
        }
    }

    fn p_cap(&self, q: f64) -> f64 {
        if self.k_hat == 0.0 {
            0.0
        } else {
            ((self.budget - q * self.k_check).max(0.0) / self.k_hat).min(1.0)
        }
    }

    fn frontier(&self, p: f64) -> f64 {
        self.objective(p, self.q_max(p))
    }
}

/// Leftmost point of `[lo, hi]` where the non-decreasing `g` reaches `target`
/// (`hi` is assumed to reach it).
fn leftmost(lo: f64, hi: f64, target: f64, g: impl Fn(f64) -> f64) -> f64 {
    if g(lo) >= target {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) >= target {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

/// Maximize the design objective for `A` by grid search at `resolution`
/// (at most `1e-4`) followed by local refinement.
pub fn vmax_oracle(spec: &ProblemSpec, set: &SourceSet, r: f64, resolution: f64) -> Result<OracleSolution> {
    if !(resolution > 0.0 && resolution <= 1e-4) {
        return Err(Error::Contract(format!("grid resolution {resolution} must lie in (0, 1e-4]")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Contract(format!("error-exponent ratio r = {r} must be positive")));
    }
    let g = Geometry::of(spec, set)?;
    let d = Design {
        position: g.position(),
        k_hat: g.k_hat,
        k_check: g.k_check,
        i_star: anomalous_summary(spec, set).map_or(0.0, |s| s.star),
        j_star: normal_summary(spec, set).map_or(0.0, |s| s.star),
        r,
        budget: spec.budget(),
    };

    let p_max = d.p_max();
    let cells = libm::ceil(p_max / resolution) as usize;
    let step = if cells == 0 { 0.0 } else { p_max / cells as f64 };
    let mut best = (0usize, d.frontier(0.0));
    for i in 1..=cells {
        let v = d.frontier(i as f64 * step);
        if v > best.1 {
            best = (i, v);
        }
    }

    // golden-section refinement inside the neighbouring cells
    let mut a = best.0.saturating_sub(1) as f64 * step;
    let mut b = ((best.0 + 1).min(cells)) as f64 * step;
    let mut p_best = best.0 as f64 * step;
    let mut v_best = best.1;
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    for _ in 0..120 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        let (fc, fe) = (d.frontier(c), d.frontier(e));
        for (p, v) in [(c, fc), (e, fe)] {
            if v > v_best {
                p_best = p;
                v_best = v;
            }
        }
        if fc < fe {
            a = c;
        } else {
            b = e;
        }
    }

    let target = v_best - 1e-12 * (1.0 + v_best.abs());
    // The best attainable value along either coordinate is concave, so it
    // rises up to the optimum.
    let (x, y) = if d.position == Position::Upper {
        let x = leftmost(0.0, p_best, target, |p| d.frontier(p));
        (x, leftmost(0.0, d.q_max(x), target, |q| d.objective(x, q)))
    } else {
        let y = leftmost(0.0, d.q_max(p_best), target, |q| d.objective(d.p_cap(q), q));
        (leftmost(0.0, d.p_cap(y), target, |p| d.objective(p, y)), y)
    };
    Ok(OracleSolution { x, y, value: d.objective(x, y) })
}
