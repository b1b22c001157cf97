//! Monte Carlo estimation over independent trials.
//!
//! Trial `k` of a batch is driven by a ChaCha8 stream seeded with
//! `seed + k`, and batch results are collected in trial order before any
//! summation, so every figure is a pure function of `(config, seed)` no
//! matter how many worker threads run the batch.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use seqanom_core::sampling::RuleKind;
use seqanom_core::{
    budget_ratio, conservative_thresholds, run_trial, AsymptoticProfile, ProblemSpec, Sampler, SourceSet, Thresholds,
    TrialRecord,
};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{HarnessError, Result};

pub const DEFAULT_HORIZON: usize = 1_000_000;

/// Sampling rule plus stopping thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Policy {
    pub rule: RuleKind,
    pub thresholds: Thresholds,
    /// Exponent ratio the sampling frequencies are designed for.
    pub r: f64,
}

impl Policy {
    /// Conservative thresholds and `r = |log α| / |log β|`.
    pub fn conservative(spec: &ProblemSpec, rule: RuleKind) -> Self {
        Policy { rule, thresholds: conservative_thresholds(spec), r: spec.error_ratio() }
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Ok(Policy { thresholds: self.thresholds.scaled(scale)?, ..self })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSettings {
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Worker threads; `0` lets the pool decide.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { trials: 10_000, seed: 0, horizon: DEFAULT_HORIZON, threads: 0 }
    }
}

pub fn run_one(
    spec: &ProblemSpec,
    policy: &Policy,
    truth: &SourceSet,
    horizon: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let mut sampler = Sampler::new(spec, policy.rule, policy.r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(run_trial(spec, &mut sampler, &policy.thresholds, truth, horizon, &mut rng, None)?)
}

pub(crate) fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Run `settings.trials` independent trials, returned in trial order.
pub fn run_trials(
    spec: &ProblemSpec,
    policy: &Policy,
    truth: &SourceSet,
    settings: &RunSettings,
) -> Result<Vec<TrialRecord>> {
    spec.check_set(truth)?;
    // surface configuration errors once instead of once per trial
    Sampler::new(spec, policy.rule, policy.r)?;
    in_pool(settings.threads, || {
        (0..settings.trials as u64)
            .into_par_iter()
            .map(|k| run_one(spec, policy, truth, settings.horizon, settings.seed.wrapping_add(k)))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Aggregate statistics of a batch of trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateReport {
    pub trials: usize,
    pub completed: usize,
    /// Mean stopping time over completed trials.
    pub mean_stop_time: f64,
    pub stop_time_se: f64,
    /// Familywise false-alarm rate over all trials (censored trials count
    /// with their last decision).
    pub fwer_fa: f64,
    pub fwer_fa_se: f64,
    pub false_alarms: usize,
    pub fwer_md: f64,
    pub fwer_md_se: f64,
    pub missed: usize,
    /// Total samples over total time, all trials pooled.
    pub budget_ratio: f64,
    pub budget_ratio_se: f64,
    pub censored_fraction: f64,
}

impl EstimateReport {
    pub fn censored(&self) -> usize {
        self.trials - self.completed
    }
}

fn mean_and_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = sum / n as f64;
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    let var = if n > 1 { ss / (n - 1) as f64 } else { f64::NAN };
    (mean, var, n)
}

fn proportion(k: usize, n: usize) -> (f64, f64) {
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Whether the trial never observed more than one distinct source.
pub fn single_source(record: &TrialRecord) -> bool {
    record.samples.iter().filter(|&&n| n > 0).count() <= 1
}

pub fn summarize(records: &[TrialRecord]) -> Result<EstimateReport> {
    let trials = records.len();
    let done = records.iter().filter(|r| !r.censored);
    let (mean, var, completed) = mean_and_var(done.map(|r| r.stop_time as f64));
    if completed == 0 {
        let locked = records.iter().filter(|r| single_source(r)).count();
        return Err(HarnessError::Degenerate(format!(
            "all {trials} trials were censored ({locked} sampled one source only)"
        )));
    }
    let false_alarms = records.iter().filter(|r| r.false_alarm).count();
    let missed = records.iter().filter(|r| r.missed).count();
    let (fwer_fa, fwer_fa_se) = proportion(false_alarms, trials);
    let (fwer_md, fwer_md_se) = proportion(missed, trials);

    // delta method for a ratio of means
    let ratio = budget_ratio(records)?;
    let n = trials as f64;
    let mt = records.iter().map(|r| r.stop_time as f64).sum::<f64>() / n;
    let resid: f64 = records
        .iter()
        .map(|r| {
            let e = r.total_samples() as f64 - ratio * r.stop_time as f64;
            e * e
        })
        .sum();
    let budget_ratio_se = if trials > 1 { (resid / (n - 1.0) / n).sqrt() / mt } else { f64::NAN };

    Ok(EstimateReport {
        trials,
        completed,
        mean_stop_time: mean,
        stop_time_se: (var / completed as f64).sqrt(),
        fwer_fa,
        fwer_fa_se,
        false_alarms,
        fwer_md,
        fwer_md_se,
        missed,
        budget_ratio: ratio,
        budget_ratio_se,
        censored_fraction: (trials - completed) as f64 / n,
    })
}

pub fn estimate(
    spec: &ProblemSpec,
    policy: &Policy,
    truth: &SourceSet,
    settings: &RunSettings,
) -> Result<EstimateReport> {
    if settings.trials < 100 {
        return Err(HarnessError::Core(seqanom_core::Error::Contract(format!(
            "estimate needs at least 100 trials, got {}",
            settings.trials
        ))));
    }
    summarize(&run_trials(spec, policy, truth, settings)?)
}

/// One-sided Clopper-Pearson upper confidence bound for a binomial
/// proportion with `k` successes out of `n`.
pub fn binomial_upper_bound(k: usize, n: usize, confidence: f64) -> f64 {
    assert!(k <= n && n > 0, "need 0 ≤ k ≤ n, n > 0");
    if k == n {
        return 1.0;
    }
    let beta = Beta::new(k as f64 + 1.0, (n - k) as f64).expect("positive shape parameters");
    beta.inverse_cdf(confidence)
}

/// Truth sets `{1..k}` for `k ∈ {ℓ, ⌈(ℓ+u)/2⌉, u}`.
pub fn worst_case_truths(spec: &ProblemSpec) -> Vec<SourceSet> {
    let (l, u) = (spec.lower(), spec.upper());
    let mut sizes = vec![l, (l + u).div_ceil(2), u];
    sizes.dedup();
    sizes.into_iter().map(SourceSet::first).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub scale: f64,
    /// Largest estimated familywise error rate (either kind, any truth) at
    /// `scale`.
    pub worst_fwer: f64,
    pub evaluations: usize,
}

/// Largest familywise error rate of either kind over `truths`.
pub fn worst_fwer(spec: &ProblemSpec, policy: &Policy, truths: &[SourceSet], settings: &RunSettings) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in truths {
        let recs = run_trials(spec, policy, t, settings)?;
        let n = recs.len() as f64;
        let fa = recs.iter().filter(|r| r.false_alarm).count() as f64 / n;
        let md = recs.iter().filter(|r| r.missed).count() as f64 / n;
        worst = worst.max(fa).max(md);
    }
    Ok(worst)
}

/// Scale the conservative thresholds down until the worst familywise error
/// rate lands in `[0.8, 1.0] × target`.
///
/// Bisection on the scale in `(0, 1]`. Every evaluation reuses the seeds in
/// `settings`, so the error rate is compared on common random numbers.
pub fn calibrate(
    spec: &ProblemSpec,
    rule: RuleKind,
    truths: &[SourceSet],
    target: f64,
    settings: &RunSettings,
) -> Result<Calibration> {
    calibrate_shared(spec, &[rule], truths, target, settings)
}

/// Like [`calibrate`], but one scale for several rules: the error rate is the
/// worst over every rule as well as every truth.
pub fn calibrate_shared(
    spec: &ProblemSpec,
    rules: &[RuleKind],
    truths: &[SourceSet],
    target: f64,
    settings: &RunSettings,
) -> Result<Calibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(HarnessError::CalibrationFailure(format!("target {target} must lie in (0, 1)")));
    }
    if rules.is_empty() {
        return Err(HarnessError::CalibrationFailure("no rule to calibrate".into()));
    }
    let band = (0.8 * target, target);
    let g = |scale: f64| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &rule in rules {
            let policy = Policy::conservative(spec, rule).with_scale(scale)?;
            worst = worst.max(worst_fwer(spec, &policy, truths, settings)?);
        }
        Ok(worst)
    };

    let top = g(1.0)?;
    if top > band.1 {
        return Err(HarnessError::CalibrationFailure(format!(
            "error rate {top} exceeds the target {target} even with conservative thresholds"
        )));
    }
    if top >= band.0 {
        return Ok(Calibration { scale: 1.0, worst_fwer: top, evaluations: 1 });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for it in 0..40 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if (band.0..=band.1).contains(&v) {
            return Ok(Calibration { scale: mid, worst_fwer: v, evaluations: it + 2 });
        }
        if v > band.1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(HarnessError::CalibrationFailure(format!(
        "no scale in [{lo}, {hi}] puts the error rate within [{}, {}] after 40 bisection steps",
        band.0, band.1
    )))
}

/// One point of an error-target sweep: mean stopping time of `rules[0]` over
/// that of `rules[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub truth: SourceSet,
    pub numerator: EstimateReport,
    pub denominator: EstimateReport,
    pub ratio: f64,
    pub ratio_se: f64,
    /// Limiting value of the ratio for round-robin over optimal sampling.
    pub are: f64,
}

/// For each `α` (with `β = α`) run both rules with conservative thresholds
/// on the same seeds and report the ratio of mean stopping times.
pub fn sweep_alpha(
    spec: &ProblemSpec,
    rules: [RuleKind; 2],
    truth: &SourceSet,
    alphas: &[f64],
    trials: &[usize],
    settings: &RunSettings,
) -> Result<Vec<SweepRow>> {
    if trials.len() != alphas.len() {
        return Err(HarnessError::config(None, "sweep needs one trial count per α"));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::config(None, "sweep α grid must be decreasing"));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for (&alpha, &n) in alphas.iter().zip(trials) {
        let sp = spec.with_error_targets(alpha, alpha)?;
        let s = RunSettings { trials: n, ..*settings };
        let num = estimate(&sp, &Policy::conservative(&sp, rules[0]), truth, &s)?;
        let den = estimate(&sp, &Policy::conservative(&sp, rules[1]), truth, &s)?;
        let ratio = num.mean_stop_time / den.mean_stop_time;
        let rel = (num.stop_time_se / num.mean_stop_time).powi(2) + (den.stop_time_se / den.mean_stop_time).powi(2);
        let are = AsymptoticProfile::new(&sp, truth, sp.error_ratio())?.are_tandem()?;
        rows.push(SweepRow {
            alpha,
            truth: truth.clone(),
            numerator: num,
            denominator: den,
            ratio,
            ratio_se: ratio * rel.sqrt(),
            are,
        });
    }
    Ok(rows)
}

/// Least-squares line through `(n, log P̂(σ > n))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Empirical survival `P̂(σ > n)` for `n = 0, 1, ...` while positive.
pub fn survival_curve(sigmas: &[usize]) -> Vec<(usize, f64)> {
    let total = sigmas.len() as f64;
    let mut sorted = sigmas.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    let mut idx = 0;
    for n in 0.. {
        while idx < sorted.len() && sorted[idx] <= n {
            idx += 1;
        }
        let left = sorted.len() - idx;
        if left == 0 {
            break;
        }
        out.push((n, left as f64 / total));
    }
    out
}

pub fn fit_log_linear(points: &[(usize, f64)]) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(n, s)| (n as f64, s.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
    Some(LogLinearFit { slope, intercept: my - slope * mx, r_squared, points: pts.len() })
}
