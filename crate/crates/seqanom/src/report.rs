//! CSV reports. Column order is fixed and floats carry nine significant
//! digits, so identical runs give byte-identical files.

use std::io::Write;

use seqanom_core::{AsymptoticProfile, ProblemSpec, TraceStep};

use crate::error::Result;
use crate::harness::{Calibration, EstimateReport, SweepRow};

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.8e}");
    // rounding can carry into the next decade; read the exponent back
    let real_exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(exp);
    if (-4..9).contains(&real_exp) {
        let decimals = (8 - real_exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        let (mant, e) = sci.split_once('e').expect("scientific form");
        format!("{}e{}", trim(mant), e)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub const ESTIMATE_HEADER: [&str; 20] = [
    "config",
    "rule",
    "truth",
    "size",
    "alpha",
    "beta",
    "scale",
    "trials",
    "completed",
    "mean_stop_time",
    "stop_time_se",
    "fwer_fa",
    "fwer_fa_se",
    "fwer_md",
    "fwer_md_se",
    "budget",
    "budget_ratio",
    "budget_ratio_se",
    "censored_fraction",
    "seed",
];

/// Everything that identifies one estimate row.
#[derive(Clone, Debug)]
pub struct EstimateRow<'a> {
    pub config: &'a str,
    pub rule: &'a str,
    pub truth: &'a seqanom_core::SourceSet,
    pub spec: &'a ProblemSpec,
    pub scale: f64,
    pub seed: u64,
    pub report: &'a EstimateReport,
}

pub struct EstimateWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EstimateWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(ESTIMATE_HEADER)?;
        Ok(EstimateWriter { inner })
    }

    pub fn write(&mut self, row: &EstimateRow<'_>) -> Result<()> {
        let r = row.report;
        self.inner.write_record([
            row.config.to_string(),
            row.rule.to_string(),
            row.truth.to_string(),
            row.truth.len().to_string(),
            fmt_sig(row.spec.alpha()),
            fmt_sig(row.spec.beta()),
            fmt_sig(row.scale),
            r.trials.to_string(),
            r.completed.to_string(),
            fmt_sig(r.mean_stop_time),
            fmt_sig(r.stop_time_se),
            fmt_sig(r.fwer_fa),
            fmt_sig(r.fwer_fa_se),
            fmt_sig(r.fwer_md),
            fmt_sig(r.fwer_md_se),
            fmt_sig(row.spec.budget()),
            fmt_sig(r.budget_ratio),
            fmt_sig(r.budget_ratio_se),
            fmt_sig(r.censored_fraction),
            row.seed.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

pub const THEORY_HEADER: [&str; 14] = [
    "set",
    "size",
    "case",
    "k_hat",
    "k_check",
    "theta",
    "r",
    "x",
    "y",
    "budget_used",
    "q",
    "optimal_time",
    "are",
    "c_star",
];

pub fn write_theory<W: Write>(w: W, spec: &ProblemSpec, profiles: &[AsymptoticProfile]) -> Result<W> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(THEORY_HEADER)?;
    for p in profiles {
        let are = p.are_tandem().map(fmt_sig).unwrap_or_else(|_| "nan".into());
        let c: Vec<String> = p.c_star.iter().map(|&v| fmt_sig(v)).collect();
        out.write_record([
            p.set.to_string(),
            p.set.len().to_string(),
            p.case().to_string(),
            fmt_sig(p.geometry.k_hat),
            fmt_sig(p.geometry.k_check),
            p.theta().map(fmt_sig).unwrap_or_else(|| "nan".into()),
            fmt_sig(p.r),
            fmt_sig(p.x()),
            fmt_sig(p.y()),
            fmt_sig(p.budget_used()),
            fmt_sig(p.q),
            fmt_sig(p.optimal_time(spec.alpha(), spec.beta())),
            are,
            c.join(" "),
        ])?;
    }
    out.flush()?;
    out.into_inner().map_err(|e| e.into_error().into())
}

pub const CALIBRATION_HEADER: [&str; 6] = ["config", "rule", "target", "scale", "worst_fwer", "evaluations"];

pub fn calibration_record(config: &str, rule: &str, target: f64, c: &Calibration) -> [String; 6] {
    [
        config.to_string(),
        rule.to_string(),
        fmt_sig(target),
        fmt_sig(c.scale),
        fmt_sig(c.worst_fwer),
        c.evaluations.to_string(),
    ]
}

pub const SWEEP_HEADER: [&str; 12] = [
    "config",
    "truth",
    "size",
    "alpha",
    "trials",
    "numerator_mean",
    "numerator_se",
    "denominator_mean",
    "denominator_se",
    "ratio",
    "ratio_se",
    "are",
];

pub fn sweep_record(config: &str, row: &SweepRow) -> [String; 12] {
    [
        config.to_string(),
        row.truth.to_string(),
        row.truth.len().to_string(),
        fmt_sig(row.alpha),
        row.numerator.trials.to_string(),
        fmt_sig(row.numerator.mean_stop_time),
        fmt_sig(row.numerator.stop_time_se),
        fmt_sig(row.denominator.mean_stop_time),
        fmt_sig(row.denominator.stop_time_se),
        fmt_sig(row.ratio),
        fmt_sig(row.ratio_se),
        fmt_sig(row.are),
    ]
}

/// Per-step dump of one trial: time, sampled sources, decision, then one
/// LLR column per source.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W, sources: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        let mut header = vec!["n".to_string(), "sampled".into(), "decision".into()];
        header.extend((1..=sources).map(|i| format!("llr_{i}")));
        inner.write_record(&header)?;
        Ok(TraceWriter { inner })
    }

    pub fn write(&mut self, step: &TraceStep<'_>) -> Result<()> {
        let sampled: Vec<String> = step.sampled.iter().map(|i| (i + 1).to_string()).collect();
        let mut rec = vec![step.n.to_string(), sampled.join(" "), step.decision.to_string()];
        rec.extend(step.lambda.iter().map(|&l| fmt_sig(l)));
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}
