//! Whole experiments driven by an [`ExperimentConfig`]; shared by the
//! command line and the test suites.

use seqanom_core::sampling::RuleKind;
use seqanom_core::{AsymptoticProfile, ProblemSpec, SourceSet};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::harness::{
    calibrate_shared, estimate, sweep_alpha, worst_case_truths, Calibration, EstimateReport, Policy, RunSettings,
    SweepRow,
};
use crate::report::{
    calibration_record, sweep_record, write_theory, EstimateRow, EstimateWriter, CALIBRATION_HEADER, SWEEP_HEADER,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRow {
    pub rule: RuleKind,
    pub truth: SourceSet,
    pub scale: f64,
    pub report: EstimateReport,
}

fn settings(cfg: &ExperimentConfig, trials: usize, threads: usize) -> RunSettings {
    RunSettings { trials, seed: cfg.run.seed, horizon: cfg.run.horizon, threads }
}

/// Calibrate `rules` jointly against the worst-case truths of the problem.
pub fn calibrate_rules(
    cfg: &ExperimentConfig,
    spec: &ProblemSpec,
    rules: &[RuleKind],
    threads: usize,
) -> Result<Calibration> {
    let s = settings(cfg, cfg.run.calibration_trials, threads);
    calibrate_shared(spec, rules, &worst_case_truths(spec), cfg.run.calibration_target, &s)
}

/// The groups of rules that receive one calibrated scale each.
fn calibration_groups(cfg: &ExperimentConfig) -> Vec<Vec<RuleKind>> {
    if cfg.run.shared_calibration {
        vec![cfg.run.rules.clone()]
    } else {
        cfg.run.rules.iter().map(|&r| vec![r]).collect()
    }
}

fn group_name(rules: &[RuleKind]) -> String {
    rules.iter().map(|r| r.name()).collect::<Vec<_>>().join("+")
}

/// Estimate every `(rule, truth)` pair of the run section, calibrating first
/// when asked to.
pub fn simulate(cfg: &ExperimentConfig, threads: usize, progress: &mut dyn FnMut(&str)) -> Result<Vec<SimulationRow>> {
    let spec = cfg.spec()?;
    let mut scales = Vec::new();
    if cfg.run.calibrate {
        for group in calibration_groups(cfg) {
            let name = group_name(&group);
            progress(&format!("calibrating {name}"));
            let c = calibrate_rules(cfg, &spec, &group, threads)?;
            progress(&format!("{name}: scale {:.6} (worst error rate {})", c.scale, c.worst_fwer));
            scales.extend(group.into_iter().map(|r| (r, c.scale)));
        }
    }
    let mut rows = Vec::new();
    for &rule in &cfg.run.rules {
        let scale = scales.iter().find(|(r, _)| *r == rule).map_or(cfg.run.threshold_scale, |&(_, s)| s);
        let policy = Policy::conservative(&spec, rule).with_scale(scale)?;
        for truth in cfg.truths() {
            progress(&format!("{rule} truth {{{truth}}}: {} trials", cfg.run.trials));
            let report = estimate(&spec, &policy, &truth, &settings(cfg, cfg.run.trials, threads))?;
            rows.push(SimulationRow { rule, truth, scale, report });
        }
    }
    Ok(rows)
}

pub fn simulation_csv(cfg: &ExperimentConfig, rows: &[SimulationRow]) -> Result<Vec<u8>> {
    let spec = cfg.spec()?;
    let mut w = EstimateWriter::new(Vec::new())?;
    for r in rows {
        w.write(&EstimateRow {
            config: &cfg.run.name,
            rule: r.rule.name(),
            truth: &r.truth,
            spec: &spec,
            scale: r.scale,
            seed: cfg.run.seed,
            report: &r.report,
        })?;
    }
    w.finish()
}

/// Profiles of the given sets (the run's truth sets when `None`), for the
/// problem's own `r`.
pub fn theory(cfg: &ExperimentConfig, sets: Option<&[SourceSet]>, r: Option<f64>) -> Result<Vec<AsymptoticProfile>> {
    let spec = cfg.spec()?;
    let r = r.unwrap_or_else(|| spec.error_ratio());
    let owned;
    let sets = match sets {
        Some(s) => s,
        None => {
            owned = cfg.truths();
            &owned
        }
    };
    Ok(sets.iter().map(|s| AsymptoticProfile::new(&spec, s, r)).collect::<Result<_, _>>()?)
}

pub fn theory_csv(cfg: &ExperimentConfig, profiles: &[AsymptoticProfile]) -> Result<Vec<u8>> {
    write_theory(Vec::new(), &cfg.spec()?, profiles)
}

pub fn calibration_csv(cfg: &ExperimentConfig, threads: usize, progress: &mut dyn FnMut(&str)) -> Result<Vec<u8>> {
    let spec = cfg.spec()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CALIBRATION_HEADER)?;
    for group in calibration_groups(cfg) {
        let name = group_name(&group);
        progress(&format!("calibrating {name}"));
        let c = calibrate_rules(cfg, &spec, &group, threads)?;
        w.write_record(calibration_record(&cfg.run.name, &name, cfg.run.calibration_target, &c))?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Error-target sweep for every truth set of the run section.
pub fn sweep(cfg: &ExperimentConfig, threads: usize, progress: &mut dyn FnMut(&str)) -> Result<Vec<SweepRow>> {
    let spec = cfg.spec()?;
    let sw =
        cfg.sweep.as_ref().ok_or_else(|| crate::error::HarnessError::config(None, "config has no [sweep] section"))?;
    let mut rows = Vec::new();
    for truth in cfg.truths() {
        progress(&format!("sweep truth {{{truth}}} over {} α values", sw.alphas.len()));
        rows.extend(sweep_alpha(&spec, sw.rules, &truth, &sw.alphas, &sw.trials, &settings(cfg, 0, threads))?);
    }
    Ok(rows)
}

pub fn sweep_csv(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record(sweep_record(&cfg.run.name, r))?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error().into())
}
