use alloc::format;
use alloc::vec::Vec;

use crate::set::SourceSet;
use crate::{Error, Result};

/// Outcome of one simulated run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    /// Stopping time, or the horizon when `censored`.
    pub stop_time: usize,
    pub censored: bool,
    /// Final decision (the last decision before the horizon when censored).
    pub decision: SourceSet,
    /// At least one source declared anomalous that is not.
    pub false_alarm: bool,
    /// At least one anomalous source not declared.
    pub missed: bool,
    /// `N_i(T)`.
    pub samples: Vec<u64>,
    /// Consistency time within the run, `None` if the final decision is wrong.
    pub sigma: Option<usize>,
}

impl TrialRecord {
    pub fn new(
        truth: &SourceSet,
        decision: SourceSet,
        stop_time: usize,
        censored: bool,
        samples: Vec<u64>,
        sigma: Option<usize>,
    ) -> Self {
        let false_alarm = decision.iter().any(|i| !truth.contains(i));
        let missed = truth.iter().any(|i| !decision.contains(i));
        TrialRecord { stop_time, censored, decision, false_alarm, missed, samples, sigma }
    }

    pub fn total_samples(&self) -> u64 {
        self.samples.iter().sum()
    }
}

/// `Σ total samples / Σ stopping times` over the records.
pub fn budget_ratio(records: &[TrialRecord]) -> Result<f64> {
    let time: u64 = records.iter().map(|r| r.stop_time as u64).sum();
    if time == 0 {
        return Err(Error::Contract(format!(
            "budget ratio needs a positive total stopping time ({} records)",
            records.len()
        )));
    }
    let samples: u64 = records.iter().map(TrialRecord::total_samples).sum();
    Ok(samples as f64 / time as f64)
}
