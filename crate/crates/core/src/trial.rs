//! One complete sequential run: sample, observe, update, check, repeat.

use alloc::vec::Vec;

use rand::Rng;

use crate::decision::{decide_into, should_stop, Thresholds};
use crate::llr::LlrState;
use crate::problem::ProblemSpec;
use crate::record::TrialRecord;
use crate::sampling::Sampler;
use crate::set::SourceSet;
use crate::Result;

/// What happened at one time step, handed to the trace callback.
#[derive(Debug)]
pub struct TraceStep<'a> {
    pub n: usize,
    pub sampled: &'a [usize],
    pub lambda: &'a [f64],
    pub decision: &'a SourceSet,
}

/// Run until the stopping rule fires or `horizon` steps have elapsed.
///
/// Observations are drawn from `rng` only for sampled sources, after the
/// rule has drawn whatever randomization it needs, so a single stream drives
/// the whole run.
pub fn run_trial<R: Rng>(
    spec: &ProblemSpec,
    sampler: &mut Sampler<'_>,
    thresholds: &Thresholds,
    truth: &SourceSet,
    horizon: usize,
    rng: &mut R,
    mut trace: Option<&mut dyn FnMut(&TraceStep<'_>)>,
) -> Result<TrialRecord> {
    spec.check_set(truth)?;
    let m = spec.sources();
    let mut state = LlrState::new(m);
    let mut decision = SourceSet::empty();
    let mut sampled = Vec::with_capacity(m);
    let mut increments = Vec::with_capacity(m);
    let mut last_wrong: Option<usize> = None;
    let mut stopped = false;

    while state.n() < horizon {
        let prev = (state.n() > 0).then_some(&decision);
        sampler.select(prev, &state, rng, &mut sampled)?;
        increments.clear();
        for &i in &sampled {
            let model = &spec.models()[i];
            let x = model.sample(truth.contains(i), rng);
            increments.push((i, model.llr_increment(x)?));
        }
        state.update(&increments)?;
        decide_into(&state, spec, &mut decision);
        if decision != *truth {
            last_wrong = Some(state.n());
        }
        if let Some(f) = trace.as_mut() {
            f(&TraceStep { n: state.n(), sampled: &sampled, lambda: state.lambda(), decision: &decision });
        }
        if should_stop(&state, thresholds, spec) {
            stopped = true;
            break;
        }
    }

    // measured within this run, censored or not
    let sigma = match last_wrong {
        Some(n) if n == state.n() => None,
        Some(n) => Some(n + 1),
        None => Some(1),
    };
    Ok(TrialRecord::new(truth, decision, state.n(), !stopped, state.counts().to_vec(), sigma))
}
