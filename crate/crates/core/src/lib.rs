//! Core statistics for sequential anomaly detection over `M` data sources
//! when only a budget of `K` observations per time step (on average) may be
//! taken.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `seqanom` companion crate.
//!
//! Layout:
//!
//! * [`model`] and [`problem`]: per-source hypothesis pairs and the full
//!   problem configuration `(M, ℓ, u, K, α, β)`.
//! * [`llr`]: running local log-likelihood ratios and their order statistics.
//! * [`decision`]: stopping rules, decision rules and conservative thresholds.
//! * [`theory`]: the asymptotic design quantities (`x_A`, `y_A`, `c*`, `Q_A`,
//!   relative efficiency of round-robin sampling).
//! * [`oracle`]: a brute-force max-min solver used to cross-check [`theory`].
//! * [`sampling`]: sampling rules (Bernoulli, fixed-size, round-robin, ...).
//! * [`record`] and [`trial`]: running one simulated policy and its outcome.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decision;
pub mod error;
pub mod llr;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod record;
pub mod sampling;
pub mod set;
pub mod theory;
pub mod trial;

pub use decision::{conservative_thresholds, decide, decide_into, should_stop, StoppingVariant, Thresholds};
pub use error::Error;
pub use llr::{consistency_time, LlrState};
pub use model::{CustomModel, KlPair, SourceModel};
pub use problem::ProblemSpec;
pub use record::{budget_ratio, TrialRecord};
pub use sampling::{FrequencyTable, RuleKind, Sampler};
pub use set::SourceSet;
pub use theory::{AsymptoticProfile, CaseLabel, Levels};
pub use trial::{run_trial, TraceStep};

pub type Result<T, E = Error> = core::result::Result<T, E>;
