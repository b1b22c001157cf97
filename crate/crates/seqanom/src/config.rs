//! Experiment configuration files (TOML).
//!
//! ```toml
//! [problem]
//! sources = 10        # M
//! lower = 1           # ℓ
//! upper = 6           # u
//! budget = 5          # K
//! alpha = 1e-3
//! beta = 1e-3         # optional, defaults to alpha
//!
//! [model]
//! family = "gaussian" # gaussian | exponential | bernoulli
//! mean = 0.5          # one value for all sources or a list of M values
//! heterogeneous = false  # gaussian only: second half of the sources gets 2 × mean
//!
//! [run]
//! name = "homogeneous"
//! rules = ["bernoulli", "chernoff", "tandem"]
//! sizes = [1, 3, 6]   # truth sets {1..k}; or `sets = [[1, 2], [4]]` (one-based)
//! trials = 10000
//! seed = 1
//! horizon = 1000000
//! threshold_scale = 1.0
//! calibrate = true    # bisection on the threshold scale before estimating
//! calibration_target = 1e-3   # defaults to alpha
//! calibration_trials = 10000  # defaults to trials
//! shared_calibration = false  # one scale for all rules instead of one each
//! output = "results.csv"
//!
//! [sweep]
//! alphas = [1e-2, 1e-4, 1e-6]
//! trials = [10000, 10000, 1000]  # or one number for every α
//! rules = ["tandem", "bernoulli"]  # ratio numerator and denominator
//! ```
//!
//! Exponential models take `rate`, Bernoulli models `p0` and `p1`, each a
//! scalar or a list.

use std::ops::Range;

use seqanom_core::sampling::RuleKind;
use seqanom_core::{ProblemSpec, SourceModel, SourceSet};
use serde::Deserialize;
use toml::{Spanned, Table, Value};

use crate::error::{HarnessError, Result};
use crate::harness::DEFAULT_HORIZON;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    model: RawModel,
    #[serde(default)]
    run: Option<Spanned<RawRun>>,
    #[serde(default)]
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    sources: Spanned<usize>,
    lower: Spanned<usize>,
    upper: Spanned<usize>,
    budget: Spanned<f64>,
    alpha: Spanned<f64>,
    beta: Option<Spanned<f64>>,
}

#[derive(Deserialize, Clone, Debug, PartialEq)]
#[serde(untagged)]
enum Param {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: Spanned<String>,
    mean: Option<Spanned<Param>>,
    rate: Option<Spanned<Param>>,
    p0: Option<Spanned<Param>>,
    p1: Option<Spanned<Param>>,
    #[serde(default)]
    heterogeneous: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    name: Option<String>,
    rules: Option<Vec<Spanned<String>>>,
    sizes: Option<Vec<usize>>,
    sets: Option<Vec<Vec<usize>>>,
    trials: Option<usize>,
    seed: Option<u64>,
    horizon: Option<usize>,
    threshold_scale: Option<Spanned<f64>>,
    calibrate: Option<bool>,
    calibration_target: Option<Spanned<f64>>,
    calibration_trials: Option<usize>,
    shared_calibration: Option<bool>,
    output: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    alphas: Vec<f64>,
    trials: Option<TrialCounts>,
    rules: Option<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TrialCounts {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Exponential,
    Bernoulli,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Bernoulli => "bernoulli",
        }
    }
}

/// Model block with per-source parameters expanded.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub family: Family,
    /// One entry per parameter name (`mean`, `rate`, or `p0` and `p1`), each
    /// with either one value or `M` values, as written.
    pub params: Vec<(&'static str, Vec<f64>)>,
    pub heterogeneous: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Truths {
    /// `{1..k}` for each `k`.
    Sizes(Vec<usize>),
    Sets(Vec<SourceSet>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub rules: Vec<RuleKind>,
    pub truths: Truths,
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    pub threshold_scale: f64,
    pub calibrate: bool,
    pub calibration_target: f64,
    pub calibration_trials: usize,
    pub shared_calibration: bool,
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub trials: Vec<usize>,
    pub rules: [RuleKind; 2],
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sources: usize,
    pub lower: usize,
    pub upper: usize,
    pub budget: f64,
    pub alpha: f64,
    pub beta: f64,
    pub model: ModelConfig,
    pub run: RunConfig,
    pub sweep: Option<SweepConfig>,
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, msg: impl Into<String>) -> Result<T> {
        Err(HarnessError::config(Some(self.line(span)), msg))
    }

    fn rules(&self, names: &[Spanned<String>]) -> Result<Vec<RuleKind>> {
        names.iter().map(|n| n.get_ref().parse::<RuleKind>().or_else(|e| self.err(n.span(), e.to_string()))).collect()
    }
}

fn expand(p: &Param) -> Vec<f64> {
    match p {
        Param::One(v) => vec![*v],
        Param::Many(v) => v.clone(),
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        HarnessError::config(line, e.message().to_string())
    })?;
    let cx = Ctx { text };
    let p = &raw.problem;
    let m = *p.sources.get_ref();
    let (l, u) = (*p.lower.get_ref(), *p.upper.get_ref());
    let k = *p.budget.get_ref();
    let alpha = *p.alpha.get_ref();
    let beta = p.beta.as_ref().map_or(alpha, |b| *b.get_ref());
    if m == 0 {
        return cx.err(p.sources.span(), "M must be positive");
    }
    if l > u {
        return cx.err(p.lower.span(), format!("ℓ ≤ u violated (ℓ = {l}, u = {u})"));
    }
    if u > m {
        return cx.err(p.upper.span(), format!("u ≤ M violated (u = {u}, M = {m})"));
    }
    if l == u && (l == 0 || l == m) {
        return cx.err(p.lower.span(), format!("ℓ = u requires 0 < ℓ < M (ℓ = u = {l}, M = {m})"));
    }
    if !(k > 0.0 && k <= m as f64) {
        return cx.err(p.budget.span(), format!("K ∈ (0, M] violated (K = {k}, M = {m})"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return cx.err(p.alpha.span(), format!("α = {alpha} must lie in (0, 1)"));
    }
    if let Some(b) = &p.beta {
        if !(beta > 0.0 && beta < 1.0) {
            return cx.err(b.span(), format!("β = {beta} must lie in (0, 1)"));
        }
    }

    let md = &raw.model;
    let family = match md.family.get_ref().as_str() {
        "gaussian" => Family::Gaussian,
        "exponential" => Family::Exponential,
        "bernoulli" => Family::Bernoulli,
        other => return cx.err(md.family.span(), format!("unknown model family {other:?}")),
    };
    let wanted: &[(&'static str, &Option<Spanned<Param>>)] = match family {
        Family::Gaussian => &[("mean", &md.mean)],
        Family::Exponential => &[("rate", &md.rate)],
        Family::Bernoulli => &[("p0", &md.p0), ("p1", &md.p1)],
    };
    let all = [("mean", &md.mean), ("rate", &md.rate), ("p0", &md.p0), ("p1", &md.p1)];
    for (name, v) in all {
        if let Some(v) = v {
            if !wanted.iter().any(|w| w.0 == name) {
                return cx.err(v.span(), format!("{name} does not apply to the {} family", family.name()));
            }
        }
    }
    let mut params = Vec::new();
    for &(name, v) in wanted {
        let Some(v) = v else {
            return cx.err(md.family.span(), format!("{} model needs `{name}`", family.name()));
        };
        let vals = expand(v.get_ref());
        if vals.len() != 1 && vals.len() != m {
            return cx.err(v.span(), format!("`{name}` needs 1 or M = {m} values, got {}", vals.len()));
        }
        params.push((name, vals));
    }
    if md.heterogeneous && family != Family::Gaussian {
        return cx.err(md.family.span(), "heterogeneous preset is only defined for the gaussian family");
    }
    if md.heterogeneous && !m.is_multiple_of(2) {
        return cx.err(p.sources.span(), format!("heterogeneous preset needs an even M, got {m}"));
    }
    let model = ModelConfig { family, params, heterogeneous: md.heterogeneous };

    let run_span = raw.run.as_ref().map_or(0..0, |r| r.span());
    let rr = raw.run.map(Spanned::into_inner).unwrap_or_default();
    let rules = match &rr.rules {
        Some(r) => cx.rules(r)?,
        None => vec![RuleKind::Bernoulli],
    };
    let truths = match (&rr.sizes, &rr.sets) {
        (Some(_), Some(_)) => return cx.err(run_span, "give either `sizes` or `sets`, not both"),
        (Some(s), None) => Truths::Sizes(s.clone()),
        (None, Some(sets)) => {
            let mut out = Vec::new();
            for s in sets {
                match SourceSet::from_one_based(s.iter().copied()) {
                    Some(set) => out.push(set),
                    None => return cx.err(run_span, "source indices in `sets` are one-based"),
                }
            }
            Truths::Sets(out)
        }
        (None, None) => Truths::Sizes(vec![l, u]),
    };
    let threshold_scale = rr.threshold_scale.as_ref().map_or(1.0, |s| *s.get_ref());
    if let Some(s) = &rr.threshold_scale {
        if !(threshold_scale > 0.0) {
            return cx.err(s.span(), "threshold_scale must be positive");
        }
    }
    let calibration_target = rr.calibration_target.as_ref().map_or(alpha, |s| *s.get_ref());
    if let Some(s) = &rr.calibration_target {
        if !(calibration_target > 0.0 && calibration_target < 1.0) {
            return cx.err(s.span(), "calibration_target must lie in (0, 1)");
        }
    }
    let trials = rr.trials.unwrap_or(10_000);
    let run = RunConfig {
        name: rr.name.unwrap_or_else(|| "experiment".into()),
        rules,
        truths,
        trials,
        seed: rr.seed.unwrap_or(1),
        horizon: rr.horizon.unwrap_or(DEFAULT_HORIZON),
        threshold_scale,
        calibrate: rr.calibrate.unwrap_or(false),
        calibration_target,
        calibration_trials: rr.calibration_trials.unwrap_or(trials),
        shared_calibration: rr.shared_calibration.unwrap_or(false),
        output: rr.output,
    };

    let sweep = match raw.sweep {
        None => None,
        Some(sw) => {
            let span = sw.span();
            let sw = sw.into_inner();
            let trials = match sw.trials {
                None => vec![run.trials; sw.alphas.len()],
                Some(TrialCounts::One(n)) => vec![n; sw.alphas.len()],
                Some(TrialCounts::Many(v)) => v,
            };
            if trials.len() != sw.alphas.len() {
                return cx.err(span, "sweep `trials` needs one entry per α");
            }
            if sw.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                return cx.err(span, "sweep α values must lie in (0, 1)");
            }
            if sw.alphas.windows(2).any(|w| w[1] >= w[0]) {
                return cx.err(span, "sweep α grid must be decreasing");
            }
            let rules = match &sw.rules {
                None => [RuleKind::Tandem, RuleKind::Bernoulli],
                Some(r) => match cx.rules(r)?.as_slice() {
                    &[a, b] => [a, b],
                    _ => return cx.err(span, "sweep `rules` takes exactly two rules"),
                },
            };
            Some(SweepConfig { alphas: sw.alphas, trials, rules })
        }
    };

    let cfg = ExperimentConfig { sources: m, lower: l, upper: u, budget: k, alpha, beta, model, run, sweep };
    // remaining checks (KL numbers, truth sets) need the built problem
    let spec = cfg.spec().map_err(|e| match e {
        HarnessError::Core(c) => HarnessError::config(Some(cx.line(md.family.span())), c.to_string()),
        other => other,
    })?;
    for t in cfg.truths() {
        if !spec.admits(&t) {
            return cx.err(run_span, format!("truth set {{{t}}} is outside the bounds ℓ = {l}, u = {u}, M = {m}"));
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    fn param(&self, name: &str, i: usize) -> f64 {
        let v = &self.model.params.iter().find(|p| p.0 == name).expect("validated parameter").1;
        if v.len() == 1 {
            v[0]
        } else {
            v[i]
        }
    }

    pub fn models(&self) -> Result<Vec<SourceModel>> {
        let m = self.sources;
        (0..m)
            .map(|i| {
                let model = match self.model.family {
                    Family::Gaussian => {
                        let mut mu = self.param("mean", i);
                        if self.model.heterogeneous && i >= m / 2 {
                            mu *= 2.0;
                        }
                        SourceModel::gaussian(mu)
                    }
                    Family::Exponential => SourceModel::exponential(self.param("rate", i)),
                    Family::Bernoulli => SourceModel::bernoulli(self.param("p0", i), self.param("p1", i)),
                };
                Ok(model?)
            })
            .collect()
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec::new(self.models()?, self.lower, self.upper, self.budget, self.alpha, self.beta)?)
    }

    pub fn truths(&self) -> Vec<SourceSet> {
        match &self.run.truths {
            Truths::Sizes(s) => s.iter().map(|&k| SourceSet::first(k)).collect(),
            Truths::Sets(s) => s.clone(),
        }
    }

    /// Back to a TOML document that parses to an equal configuration.
    pub fn to_toml(&self) -> String {
        let floats = |v: &[f64]| Value::Array(v.iter().map(|&x| Value::Float(x)).collect());
        let ints = |v: &[usize]| Value::Array(v.iter().map(|&x| Value::Integer(x as i64)).collect());
        let names = |v: &[RuleKind]| Value::Array(v.iter().map(|r| Value::String(r.name().into())).collect());

        let mut problem = Table::new();
        problem.insert("sources".into(), Value::Integer(self.sources as i64));
        problem.insert("lower".into(), Value::Integer(self.lower as i64));
        problem.insert("upper".into(), Value::Integer(self.upper as i64));
        problem.insert("budget".into(), Value::Float(self.budget));
        problem.insert("alpha".into(), Value::Float(self.alpha));
        problem.insert("beta".into(), Value::Float(self.beta));

        let mut model = Table::new();
        model.insert("family".into(), Value::String(self.model.family.name().into()));
        for (name, vals) in &self.model.params {
            let v = if vals.len() == 1 { Value::Float(vals[0]) } else { floats(vals) };
            model.insert((*name).into(), v);
        }
        model.insert("heterogeneous".into(), Value::Boolean(self.model.heterogeneous));

        let r = &self.run;
        let mut run = Table::new();
        run.insert("name".into(), Value::String(r.name.clone()));
        run.insert("rules".into(), names(&r.rules));
        match &r.truths {
            Truths::Sizes(s) => run.insert("sizes".into(), ints(s)),
            Truths::Sets(s) => run.insert(
                "sets".into(),
                Value::Array(s.iter().map(|set| ints(&set.iter().map(|i| i + 1).collect::<Vec<_>>())).collect()),
            ),
        };
        run.insert("trials".into(), Value::Integer(r.trials as i64));
        run.insert("seed".into(), Value::Integer(r.seed as i64));
        run.insert("horizon".into(), Value::Integer(r.horizon as i64));
        run.insert("threshold_scale".into(), Value::Float(r.threshold_scale));
        run.insert("calibrate".into(), Value::Boolean(r.calibrate));
        run.insert("calibration_target".into(), Value::Float(r.calibration_target));
        run.insert("calibration_trials".into(), Value::Integer(r.calibration_trials as i64));
        run.insert("shared_calibration".into(), Value::Boolean(r.shared_calibration));
        if let Some(o) = &r.output {
            run.insert("output".into(), Value::String(o.clone()));
        }

        let mut doc = Table::new();
        doc.insert("problem".into(), Value::Table(problem));
        doc.insert("model".into(), Value::Table(model));
        doc.insert("run".into(), Value::Table(run));
        if let Some(sw) = &self.sweep {
            let mut t = Table::new();
            t.insert("alphas".into(), floats(&sw.alphas));
            t.insert("trials".into(), ints(&sw.trials));
            t.insert("rules".into(), names(&sw.rules));
            doc.insert("sweep".into(), Value::Table(t));
        }
        toml::to_string(&doc).expect("tables always serialize")
    }
}
