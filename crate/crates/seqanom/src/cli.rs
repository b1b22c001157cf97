use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqanom_core::sampling::RuleKind;
use seqanom_core::{run_trial, Sampler, SourceSet};

use crate::config::{parse_config, ExperimentConfig, Truths};
use crate::error::{HarnessError, Result};
use crate::experiment;
use crate::harness::Policy;
use crate::report::TraceWriter;

#[derive(Parser, Debug)]
#[command(name = "seqanom", version, about = "Sequential anomaly detection under sampling constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the design profile (case, x, y, c*, Q, ARE) of anomaly sets.
    Theory {
        #[command(flatten)]
        common: Common,
        /// Error-exponent ratio; defaults to |log α| / |log β|.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Estimate error rates, stopping times and budget use.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write a per-step CSV trace of the first trial of the first
        /// (rule, set) pair.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Tune the threshold scale to the calibration target.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Ratio of mean stopping times over a grid of error targets.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Sampling rule(s), comma separated; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub rule: Vec<String>,
    /// Anomaly set as one-based indices, e.g. `1,2,3`; overrides the config.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output CSV; defaults to the config's `output`, else standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "SEQANOM_THREADS", default_value_t = 0)]
    pub threads: usize,
}

fn parse_set(s: &str) -> Result<SourceSet> {
    let idx = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::config(None, format!("--set {s:?}: {e}")))?;
    SourceSet::from_one_based(idx).ok_or_else(|| HarnessError::config(None, "--set indices are one-based"))
}

impl Common {
    /// Load the config and apply command-line overrides, re-validating the
    /// result.
    pub fn load(&self) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(&self.config)?;
        let mut cfg = parse_config(&text)?;
        if !self.rule.is_empty() {
            cfg.run.rules = self.rule.iter().map(|r| r.parse::<RuleKind>()).collect::<Result<_, _>>()?;
        }
        if let Some(s) = &self.set {
            cfg.run.truths = Truths::Sets(vec![parse_set(s)?]);
        }
        if let Some(a) = self.alpha {
            // β follows α unless given separately
            if self.beta.is_none() && cfg.beta == cfg.alpha {
                cfg.beta = a;
            }
            if cfg.run.calibration_target == cfg.alpha {
                cfg.run.calibration_target = a;
            }
            cfg.alpha = a;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(t) = self.trials {
            if cfg.run.calibration_trials == cfg.run.trials {
                cfg.run.calibration_trials = t;
            }
            cfg.run.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.run.horizon = h;
        }
        // round-trip through the parser so overrides get the same checks
        parse_config(&cfg.to_toml())
    }

    fn output(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.run.output.as_ref().map(PathBuf::from))
    }
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => File::create(p)?.write_all(bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn progress(msg: &str) {
    eprintln!("[seqanom] {msg}");
}

fn write_trace(cfg: &ExperimentConfig, path: &PathBuf) -> Result<()> {
    let spec = cfg.spec()?;
    let rule = cfg.run.rules[0];
    let truth = cfg.truths().into_iter().next().unwrap_or_default();
    let policy = Policy::conservative(&spec, rule).with_scale(cfg.run.threshold_scale)?;
    let mut sampler = Sampler::new(&spec, rule, policy.r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut w = TraceWriter::new(File::create(path)?, spec.sources())?;
    let mut failure = None;
    let mut sink = |s: &seqanom_core::TraceStep<'_>| {
        if failure.is_none() {
            failure = w.write(s).err();
        }
    };
    run_trial(&spec, &mut sampler, &policy.thresholds, &truth, cfg.run.horizon, &mut rng, Some(&mut sink))?;
    if let Some(e) = failure {
        return Err(e);
    }
    w.finish()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Theory { common, ratio } => {
            let cfg = common.load()?;
            let profiles = experiment::theory(&cfg, None, ratio)?;
            emit(common.output(&cfg), &experiment::theory_csv(&cfg, &profiles)?)
        }
        Command::Simulate { common, trace } => {
            let cfg = common.load()?;
            if let Some(t) = &trace {
                write_trace(&cfg, t)?;
            }
            let rows = experiment::simulate(&cfg, common.threads, &mut progress)?;
            emit(common.output(&cfg), &experiment::simulation_csv(&cfg, &rows)?)
        }
        Command::Calibrate { common } => {
            let cfg = common.load()?;
            emit(common.output(&cfg), &experiment::calibration_csv(&cfg, common.threads, &mut progress)?)
        }
        Command::Sweep { common } => {
            let cfg = common.load()?;
            let rows = experiment::sweep(&cfg, common.threads, &mut progress)?;
            emit(common.output(&cfg), &experiment::sweep_csv(&cfg, &rows)?)
        }
    }
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("seqanom: {e}");
            1
        }
    }
}
