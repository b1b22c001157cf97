//! Sampling rules: which sources to observe at the next time step.
//!
//! Probabilistic rules depend on the past only through the current decision
//! `D` and sample source `i` with probability `c_i(D)`; here `c_i(D)` is the
//! minimal optimal frequency `c*_i(D)` from [`crate::theory`].
//!
//! * `bernoulli`: independent inclusions with probabilities `c*_i(D)`.
//! * `chernoff`: exactly `K` sources per step; the marginals are `c*(D)`
//!   padded up to a total of `K` and realised by systematic sampling.
//! * `uniform`: independent inclusions with probability `K/M`.
//! * `tandem`: round-robin window of `K` consecutive sources.
//! * `equalizing`: one source per step, the one whose empirical sampling
//!   frequency is furthest from its target level. It can fail to terminate.
//! * `ordering`: the `K` sources with the smallest `|Λ_i|` (experimental).
//!
//! Before the first decision exists every rule falls back to treating all
//! sources alike: probability `K/M` each (systematic for `chernoff`), a
//! uniformly random source for `equalizing`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::llr::LlrState;
use crate::problem::ProblemSpec;
use crate::set::SourceSet;
use crate::theory::AsymptoticProfile;
use crate::{Error, Result};

/// Largest number of candidate sets [`FrequencyTable::build`] will tabulate.
pub const DEFAULT_TABLE_CAP: u128 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Bernoulli,
    Chernoff,
    Uniform,
    Tandem,
    Equalizing,
    Ordering,
}

impl RuleKind {
    pub const ALL: [RuleKind; 6] = [
        RuleKind::Bernoulli,
        RuleKind::Chernoff,
        RuleKind::Uniform,
        RuleKind::Tandem,
        RuleKind::Equalizing,
        RuleKind::Ordering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Bernoulli => "bernoulli",
            RuleKind::Chernoff => "chernoff",
            RuleKind::Uniform => "uniform",
            RuleKind::Tandem => "tandem",
            RuleKind::Equalizing => "equalizing",
            RuleKind::Ordering => "ordering",
        }
    }

    /// Rules that take exactly `K` observations per step.
    pub fn fixed_size(self) -> bool {
        matches!(self, RuleKind::Chernoff | RuleKind::Tandem | RuleKind::Ordering | RuleKind::Equalizing)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnsupportedRule(format!("unknown rule {s:?}")))
    }
}

/// Per-decision sampling data.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub c_star: Vec<f64>,
    /// `c_star` water-filled up to a total of `K`.
    pub padded: Vec<f64>,
    pub x: f64,
    pub y: f64,
}

impl TableEntry {
    fn new(spec: &ProblemSpec, set: &SourceSet, r: f64) -> Result<Self> {
        let p = AsymptoticProfile::new(spec, set, r)?;
        let padded = pad_to_budget(&p.c_star, spec.budget());
        Ok(TableEntry { x: p.x(), y: p.y(), c_star: p.c_star, padded })
    }
}

/// Sampling frequencies per decision set, filled on first use.
#[derive(Clone, Debug)]
pub struct FrequencyTable {
    r: f64,
    entries: BTreeMap<SourceSet, TableEntry>,
}

impl FrequencyTable {
    pub fn lazy(r: f64) -> Self {
        FrequencyTable { r, entries: BTreeMap::new() }
    }

    /// Tabulate every candidate decision up front, refusing when there are
    /// more than `cap` of them.
    pub fn build(spec: &ProblemSpec, r: f64, cap: u128) -> Result<Self> {
        let sets = spec.candidate_count();
        if sets > cap {
            return Err(Error::CombinatorialBlowup { sets, cap });
        }
        let mut t = Self::lazy(r);
        for d in SourceSet::enumerate(spec.sources(), spec.lower(), spec.upper()) {
            let e = TableEntry::new(spec, &d, r)?;
            t.entries.insert(d, e);
        }
        Ok(t)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&mut self, spec: &ProblemSpec, d: &SourceSet) -> Result<&TableEntry> {
        if !self.entries.contains_key(d) {
            let e = TableEntry::new(spec, d, self.r)?;
            self.entries.insert(d.clone(), e);
        }
        Ok(&self.entries[d])
    }
}

/// Raise marginals to a total of `budget` by spreading the slack evenly over
/// sources still below one, repeating until the slack is used up.
pub fn pad_to_budget(c: &[f64], budget: f64) -> Vec<f64> {
    let mut out: Vec<f64> = c.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let target = budget.min(out.len() as f64);
    for _ in 0..=out.len() {
        let slack = target - out.iter().sum::<f64>();
        if slack <= 1e-12 {
            break;
        }
        let open = out.iter().filter(|&&v| v < 1.0).count();
        if open == 0 {
            break;
        }
        let share = slack / open as f64;
        for v in out.iter_mut().filter(|v| **v < 1.0) {
            *v += share;
            if *v >= 1.0 - 1e-12 {
                *v = 1.0;
            }
        }
    }
    out
}

/// Draw a set whose size is the (integer) total of `marginals`, with source
/// `i` included with probability `marginals[i]`.
///
/// Sources are laid end to end in random order on `[0, K)`, each covering an
/// interval as long as its marginal, and the points `U, U+1, ..., U+K−1` pick
/// the sample.
pub fn systematic_sample<R: Rng + ?Sized>(
    marginals: &[f64],
    size: usize,
    rng: &mut R,
    perm: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    let m = marginals.len();
    perm.clear();
    perm.extend(0..m);
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let u: f64 = rng.random();
    out.clear();
    let mut cum = 0.0;
    let mut next = u;
    for &i in perm.iter() {
        cum += marginals[i];
        if out.len() < size && next < cum {
            out.push(i);
            next += 1.0;
        }
    }
    // Rounding can leave the total a hair short of K.
    for &i in perm.iter().rev() {
        if out.len() >= size {
            break;
        }
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out.sort_unstable();
}

/// Per-trial sampling state.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    spec: &'a ProblemSpec,
    kind: RuleKind,
    size: usize,
    table: FrequencyTable,
    uniform: Vec<f64>,
    perm: Vec<usize>,
}

impl<'a> Sampler<'a> {
    /// `r` is the exponent ratio the frequency table is designed for.
    pub fn new(spec: &'a ProblemSpec, kind: RuleKind, r: f64) -> Result<Self> {
        Self::with_table(spec, kind, FrequencyTable::lazy(r))
    }

    pub fn with_table(spec: &'a ProblemSpec, kind: RuleKind, table: FrequencyTable) -> Result<Self> {
        let k = spec.budget();
        let size = match (kind, spec.integer_budget()) {
            (RuleKind::Bernoulli | RuleKind::Uniform, _) => 0,
            (RuleKind::Equalizing, Some(1)) if spec.is_homogeneous() => 1,
            (RuleKind::Equalizing, _) => {
                return Err(Error::UnsupportedRule(format!(
                    "equalizing needs K = 1 and identical sources, got K = {k}"
                )))
            }
            (_, Some(n)) => n,
            (_, None) => return Err(Error::UnsupportedRule(format!("{kind} needs an integer budget, got K = {k}"))),
        };
        let m = spec.sources();
        Ok(Sampler { spec, kind, size, table, uniform: alloc::vec![k / m as f64; m], perm: Vec::with_capacity(m) })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn table(&self) -> &FrequencyTable {
        &self.table
    }

    /// Sources to sample at time `state.n() + 1` given the latest decision
    /// (`None` before the first observation). Written to `out` in ascending
    /// order.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        decision: Option<&SourceSet>,
        state: &LlrState,
        rng: &mut R,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        let m = self.spec.sources();
        out.clear();
        match self.kind {
            RuleKind::Uniform => bernoulli_into(&self.uniform, rng, out),
            RuleKind::Bernoulli => match decision {
                None => bernoulli_into(&self.uniform, rng, out),
                Some(d) => bernoulli_into(&self.table.entry(self.spec, d)?.c_star, rng, out),
            },
            RuleKind::Chernoff => {
                let marg = match decision {
                    None => &self.uniform,
                    Some(d) => &self.table.entry(self.spec, d)?.padded,
                };
                systematic_sample(marg, self.size, rng, &mut self.perm, out);
            }
            RuleKind::Tandem => {
                let start = (state.n() * self.size) % m;
                out.extend((0..self.size).map(|k| (start + k) % m));
                out.sort_unstable();
            }
            RuleKind::Ordering => {
                let lambda = state.lambda();
                self.perm.clear();
                self.perm.extend(0..m);
                self.perm.sort_by(|&i, &j| lambda[i].abs().total_cmp(&lambda[j].abs()).then(i.cmp(&j)));
                out.extend_from_slice(&self.perm[..self.size]);
                out.sort_unstable();
            }
            RuleKind::Equalizing => match decision {
                None => out.push(rng.random_range(0..m)),
                Some(d) => {
                    let e = self.table.entry(self.spec, d)?;
                    let (x, y) = (e.x, e.y);
                    out.push(equalizing_pick(d, state, x, y));
                }
            },
        }
        Ok(())
    }
}

fn bernoulli_into<R: Rng + ?Sized>(c: &[f64], rng: &mut R, out: &mut Vec<usize>) {
    for (i, &p) in c.iter().enumerate() {
        let take = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < p
        };
        if take {
            out.push(i);
        }
    }
}

/// Source whose empirical frequency is furthest from its level (`x` inside
/// `d`, `y` outside), ties to the smallest index.
pub fn equalizing_pick(d: &SourceSet, state: &LlrState, x: f64, y: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..state.sources() {
        let level = if d.contains(i) { x } else { y };
        let dist = (state.proportion(i) - level).abs();
        if dist > best.1 {
            best = (i, dist);
        }
    }
    best.0
}

/// Human-readable summary of a rule's requirements.
pub fn describe(kind: RuleKind) -> String {
    let s = match kind {
        RuleKind::Bernoulli => "independent inclusions at the optimal frequencies",
        RuleKind::Chernoff => "exactly K sources per step at padded optimal frequencies (integer K)",
        RuleKind::Uniform => "independent inclusions with probability K/M",
        RuleKind::Tandem => "round-robin window of K sources (integer K)",
        RuleKind::Equalizing => "one source per step chasing the target levels (K = 1, identical sources)",
        RuleKind::Ordering => "the K sources with the smallest |LLR| (integer K, experimental)",
    };
    String::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn homog(m: usize, l: usize, u: usize, k: f64) -> ProblemSpec {
        ProblemSpec::homogeneous_gaussian(m, l, u, k, 1e-3, 1e-3, 0.5).unwrap()
    }

    fn state_with(lambda: &[f64]) -> LlrState {
        let mut s = LlrState::new(lambda.len());
        let inc: Vec<_> = lambda.iter().copied().enumerate().collect();
        s.update(&inc).unwrap();
        s
    }

    #[test]
    fn table_examples() {
        let sp = homog(10, 1, 6, 5.0);
        let mut t = FrequencyTable::lazy(1.0);
        assert!(t.entry(&sp, &SourceSet::first(3)).unwrap().c_star.iter().all(|&c| c == 0.5));
        let lo = t.entry(&sp, &SourceSet::new([4])).unwrap();
        assert_eq!(lo.c_star[4], 0.0);
        assert!(lo.c_star.iter().enumerate().all(|(i, &c)| i == 4 || c == 5.0 / 9.0));
        assert_eq!(t.len(), 2);

        let sp = homog(10, 2, 2, 5.0);
        let t = FrequencyTable::build(&sp, 1.0, DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(t.len(), 45);
        let mut t = t;
        let e = t.entry(&sp, &SourceSet::first(2)).unwrap();
        assert_eq!(&e.c_star[..3], &[1.0, 1.0, 0.375]);
    }

    #[test]
    fn eager_table_respects_cap() {
        let sp = homog(20, 0, 20, 5.0);
        assert_eq!(
            FrequencyTable::build(&sp, 1.0, DEFAULT_TABLE_CAP).unwrap_err(),
            Error::CombinatorialBlowup { sets: 1 << 20, cap: DEFAULT_TABLE_CAP }
        );
    }

    #[test]
    fn padding_fills_to_budget() {
        let p = pad_to_budget(&[0.0, 5.0 / 9.0, 5.0 / 9.0, 1.0], 3.0);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert_eq!(p[3], 1.0);
        assert!(p.iter().zip([0.0, 5.0 / 9.0, 5.0 / 9.0, 1.0]).all(|(a, b)| *a >= b));
        assert_eq!(pad_to_budget(&[0.9, 0.1], 2.0), vec![1.0, 1.0]);
    }

    #[test]
    fn bernoulli_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = Vec::new();
        bernoulli_into(&[0.0; 4], &mut rng, &mut out);
        assert!(out.is_empty());
        bernoulli_into(&[1.0, 0.0, 1.0, 0.0], &mut rng, &mut out);
        assert_eq!(out, [0, 2]);
    }

    #[test]
    fn bernoulli_inclusion_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut out = Vec::new();
        let mut hits = [0u32; 10];
        let n = 100_000;
        for _ in 0..n {
            out.clear();
            bernoulli_into(&[0.5; 10], &mut rng, &mut out);
            for &i in &out {
                hits[i] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / n as f64 - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn systematic_sampling_is_exact_size_with_right_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut perm, mut out) = (Vec::new(), Vec::new());
        systematic_sample(&[1.0; 4], 4, &mut rng, &mut perm, &mut out);
        assert_eq!(out, [0, 1, 2, 3]);
        for _ in 0..50 {
            systematic_sample(&[1.0, 1.0, 0.0, 0.0, 0.0], 2, &mut rng, &mut perm, &mut out);
            assert_eq!(out, [0, 1]);
        }
        let marg = [0.2, 0.9, 0.5, 0.4, 1.0, 0.0, 0.7, 0.3];
        let n = 100_000;
        let mut hits = [0u32; 8];
        for _ in 0..n {
            systematic_sample(&marg, 4, &mut rng, &mut perm, &mut out);
            assert_eq!(out.len(), 4);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
            for &i in &out {
                hits[i] += 1;
            }
        }
        for (h, p) in hits.iter().zip(marg) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*h as f64 / n as f64 - p).abs() <= 5.0 * se + 1e-12, "{h} vs {p}");
        }
    }

    #[test]
    fn chernoff_mid_case() {
        let sp = homog(10, 1, 6, 5.0);
        let mut s = Sampler::new(&sp, RuleKind::Chernoff, 1.0).unwrap();
        let st = LlrState::new(10);
        let d = SourceSet::first(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = Vec::new();
        let n = 100_000;
        let mut hits = [0u32; 10];
        for _ in 0..n {
            s.select(Some(&d), &st, &mut rng, &mut out).unwrap();
            assert_eq!(out.len(), 5);
            for &i in &out {
                hits[i] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / n as f64 - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn chernoff_full_budget() {
        let sp = homog(6, 1, 4, 6.0);
        let mut s = Sampler::new(&sp, RuleKind::Chernoff, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut out = Vec::new();
        s.select(Some(&SourceSet::first(1)), &LlrState::new(6), &mut rng, &mut out).unwrap();
        assert_eq!(out, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn integer_budget_rules_reject_fractions() {
        let sp = homog(10, 1, 6, 4.5);
        for kind in [RuleKind::Chernoff, RuleKind::Tandem, RuleKind::Ordering, RuleKind::Equalizing] {
            assert!(matches!(Sampler::new(&sp, kind, 1.0), Err(Error::UnsupportedRule(_))));
        }
        assert!(Sampler::new(&sp, RuleKind::Bernoulli, 1.0).is_ok());
        assert!(Sampler::new(&homog(10, 1, 6, 2.0), RuleKind::Equalizing, 1.0).is_err());
        let het = ProblemSpec::heterogeneous_gaussian(4, 0, 4, 1.0, 0.1, 0.1, 1.0).unwrap();
        assert!(Sampler::new(&het, RuleKind::Equalizing, 1.0).is_err());
    }

    fn tandem_run(m: usize, k: f64, steps: usize) -> Vec<Vec<usize>> {
        let sp = homog(m, 1, m - 1, k);
        let mut s = Sampler::new(&sp, RuleKind::Tandem, 1.0).unwrap();
        let mut st = LlrState::new(m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::new();
        let mut sets = Vec::new();
        for _ in 0..steps {
            s.select(None, &st, &mut rng, &mut out).unwrap();
            sets.push(out.iter().map(|i| i + 1).collect());
            st.update(&[]).unwrap();
        }
        sets
    }

    #[test]
    fn tandem_windows() {
        let w = tandem_run(10, 5.0, 3);
        assert_eq!(w, [vec![1, 2, 3, 4, 5], vec![6, 7, 8, 9, 10], vec![1, 2, 3, 4, 5]]);
        let w = tandem_run(3, 2.0, 3);
        assert_eq!(w, [vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut counts = [0; 3];
        for s in &w {
            for &i in s {
                counts[i - 1] += 1;
            }
        }
        assert_eq!(counts, [2, 2, 2]);
        assert!(tandem_run(4, 4.0, 3).iter().all(|s| s == &[1, 2, 3, 4]));
    }

    #[test]
    fn ordering_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::new();
        let sp = homog(3, 0, 3, 1.0);
        let mut s = Sampler::new(&sp, RuleKind::Ordering, 1.0).unwrap();
        s.select(None, &state_with(&[5.0, -0.1, 3.0]), &mut rng, &mut out).unwrap();
        assert_eq!(out, [1]);
        s.select(None, &state_with(&[2.0, 2.0, 2.0]), &mut rng, &mut out).unwrap();
        assert_eq!(out, [0]);
        let sp = homog(4, 0, 4, 2.0);
        let mut s = Sampler::new(&sp, RuleKind::Ordering, 1.0).unwrap();
        s.select(None, &state_with(&[-2.0, 1.0, -0.5, 4.0]), &mut rng, &mut out).unwrap();
        assert_eq!(out, [1, 2]);
    }

    #[test]
    fn equalizing_examples() {
        // π = (1, 0, 0) after one step on source 1
        let mut st = LlrState::new(3);
        st.update(&[(0, 0.3)]).unwrap();
        let d = SourceSet::new([0]);
        assert_eq!(equalizing_pick(&d, &st, 0.3, 0.4), 0);
        assert_eq!(equalizing_pick(&d, &LlrState::new(3), 0.2, 0.4), 1);
        // all distances zero
        let mut st = LlrState::new(2);
        st.update(&[(0, 1.0)]).unwrap();
        st.update(&[(1, 1.0)]).unwrap();
        assert_eq!(equalizing_pick(&SourceSet::new([1]), &st, 0.5, 0.5), 0);
    }

    #[test]
    fn rule_names_round_trip() {
        for k in RuleKind::ALL {
            assert_eq!(k.name().parse::<RuleKind>().unwrap(), k);
            assert!(!describe(k).is_empty());
        }
        assert!("cusum".parse::<RuleKind>().is_err());
    }
}
