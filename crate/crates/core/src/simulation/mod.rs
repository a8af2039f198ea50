//! Seeded Monte Carlo harness for time-uniform coverage.
//!
//! A replication draws a loss stream from a [`ScenarioConfig`], recomputes the
//! posterior after every step, and asks every configured bound whether its
//! inequality still holds. A replication *violates* a bound if the inequality
//! fails at any `t ≤ horizon`; the coverage report is the fraction of
//! replications that ever do.
//!
//! Scenario parameters are ours: there is no canonical experiment to copy.

mod bounds;
pub mod config;
mod rng;
mod scenario;

use std::io::Write;

use rayon::prelude::*;

pub use config::{
    BoundConfig, BoundKind, ExperimentConfig, PosteriorRule, ScenarioConfig, ScheduleConfig,
};
pub use rng::stream_rng;

use bounds::{Context, Tracker};
use scenario::Scenario;

use crate::divergences::{finite_kl, log_sum_exp, Distribution, FiniteMixture};
use crate::error::{check_delta, Error, Result};

/// Environment variable that overrides the number of worker threads.
pub const THREADS_ENV: &str = "ANYTIME_PAC_THREADS";

/// `ρ ∝ ν·exp(−λ·cum_losses)`, normalized in the log domain.
pub fn gibbs_posterior(
    prior: &FiniteMixture,
    cum_losses: &[f64],
    lambda: f64,
) -> Result<FiniteMixture> {
    if cum_losses.len() != prior.support_size() {
        return Err(Error::DimensionMismatch(
            cum_losses.len(),
            prior.support_size(),
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain {
            name: "lambda_post",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    if lambda == 0.0 {
        return Ok(prior.clone());
    }
    let logits: Vec<f64> = prior
        .weights()
        .iter()
        .zip(cum_losses)
        .map(|(w, l)| {
            if *w > 0.0 {
                w.ln() - lambda * l
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let z = log_sum_exp(&logits);
    FiniteMixture::normalized(logits.iter().map(|l| (l - z).exp()).collect())
}

/// One row of a trace: bound `bound` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub bound: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub kl: f64,
    pub violated: bool,
}

/// A full replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rep: u64,
    pub labels: Vec<String>,
    pub records: Vec<TraceRecord>,
    /// First `t` at which each bound failed, `0` if it never did.
    pub first_violation: Vec<u64>,
}

/// Violation statistics for one bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCoverage {
    pub label: String,
    pub violations: u64,
    pub violation_rate: f64,
    pub std_error: f64,
    /// `δ + 3√(δ(1−δ)/reps)`.
    pub threshold: f64,
}

impl BoundCoverage {
    pub fn pass(&self) -> bool {
        self.violation_rate <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub reps: u64,
    pub horizon: u64,
    pub delta: f64,
    pub bounds: Vec<BoundCoverage>,
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    scenario: Scenario,
    prior: FiniteMixture,
    fixed_posterior: Option<(Distribution, f64)>,
    trackers: Vec<Tracker>,
    labels: Vec<String>,
    risk: Option<Vec<f64>>,
    mean: Option<Vec<f64>>,
}

impl Experiment {
    /// Validates the config; every configuration error surfaces here, before sampling.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        check_delta(config.delta).map_err(|e| Error::Config(e.to_string()))?;
        if config.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if config.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if config.bounds.is_empty() {
            return Err(Error::Config("no bounds configured".into()));
        }
        let scenario = Scenario::new(&config.scenario, config.horizon)?;
        let n = scenario.theta_count();
        let as_config = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let prior = match &config.prior {
            Some(w) => FiniteMixture::new(w.clone()).map_err(as_config)?,
            None => FiniteMixture::uniform(n)?,
        };
        if prior.support_size() != n {
            return Err(Error::Config(format!(
                "prior has {} weights but the scenario has {n} parameters",
                prior.support_size()
            )));
        }
        let fixed_posterior = match &config.posterior {
            PosteriorRule::Gibbs { lambda } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Error::Config(format!(
                        "gibbs lambda = {lambda} must be finite and nonnegative"
                    )));
                }
                None
            }
            PosteriorRule::Fixed { weights } => {
                let rho = match weights {
                    Some(w) => FiniteMixture::new(w.clone()).map_err(as_config)?,
                    None => prior.clone(),
                };
                let kl = finite_kl(&rho, &prior).map_err(as_config)?;
                if !kl.is_finite() {
                    return Err(Error::Config(
                        "fixed posterior is not absolutely continuous w.r.t. the prior".into(),
                    ));
                }
                Some((Distribution::Finite(rho), kl))
            }
        };
        let trackers = config
            .bounds
            .iter()
            .map(|b| {
                Tracker::new(
                    b,
                    &scenario,
                    config.scenario.name(),
                    &prior,
                    config.horizon,
                    config.delta,
                )
                .map_err(as_config)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<String> = config.bounds.iter().map(BoundConfig::label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Config(format!(
                    "duplicate bound label `{l}`; set `label` to disambiguate"
                )));
            }
        }
        Ok(Self {
            risk: scenario.risk(),
            mean: scenario.iid_mean(),
            config,
            scenario,
            prior,
            fixed_posterior,
            trackers,
            labels,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Runs replication `rep`; deterministic in `(seed, rep)`.
    pub fn run(&self, rep: u64) -> Result<Trace> {
        self.run_inner(rep, true)
    }

    fn run_inner(&self, rep: u64, record: bool) -> Result<Trace> {
        let cfg = &self.config;
        let n = self.scenario.theta_count();
        let mut trackers = self.trackers.clone();
        let mut state = self.scenario.start(cfg.seed, rep, cfg.horizon);
        let mut cum_loss = vec![0.0; n];
        let mut first_violation = vec![0u64; trackers.len()];
        let mut records = Vec::new();
        for t in 1..=cfg.horizon {
            let step = self.scenario.step(&mut state, cfg.seed, rep, t);
            for tr in trackers.iter_mut() {
                tr.update(t, &step)?;
            }
            for (c, f) in cum_loss.iter_mut().zip(&step.loss) {
                *c += f;
            }
            let (rho, kl) = match (&self.fixed_posterior, &cfg.posterior) {
                (Some((rho, kl)), _) => (rho.clone(), *kl),
                (None, PosteriorRule::Gibbs { lambda }) => {
                    let rho = gibbs_posterior(&self.prior, &cum_loss, *lambda)?;
                    let kl = finite_kl(&rho, &self.prior)?;
                    (Distribution::Finite(rho), kl)
                }
                (None, PosteriorRule::Fixed { .. }) => {
                    unreachable!("fixed posterior is precomputed")
                }
            };
            let ctx = Context {
                t,
                delta: cfg.delta,
                rho: &rho,
                nu: &self.prior,
                kl,
                cum_loss: &cum_loss,
                risk: self.risk.as_deref(),
                mean: self.mean.as_deref(),
            };
            for (i, tr) in trackers.iter().enumerate() {
                let Some((lhs, rhs)) = tr.evaluate(&ctx)? else {
                    continue;
                };
                let violated = lhs > rhs;
                if violated && first_violation[i] == 0 {
                    first_violation[i] = t;
                }
                if record {
                    records.push(TraceRecord {
                        t,
                        bound: i,
                        lhs,
                        rhs,
                        kl,
                        violated,
                    });
                }
            }
        }
        Ok(Trace {
            rep,
            labels: self.labels.clone(),
            records,
            first_violation,
        })
    }

    /// Runs replications `0..reps` in parallel and aggregates them in index order.
    pub fn coverage(&self) -> Result<CoverageReport> {
        let cfg = &self.config;
        let run_all = || -> Result<Vec<Vec<u64>>> {
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| self.run_inner(rep, false).map(|t| t.first_violation))
                .collect()
        };
        let firsts = match thread_override()? {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(run_all)?,
            None => run_all()?,
        };
        let reps = cfg.reps as f64;
        let delta = cfg.delta;
        let threshold = delta + 3.0 * (delta * (1.0 - delta) / reps).sqrt();
        let bounds = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let violations = firsts.iter().filter(|f| f[i] > 0).count() as u64;
                let rate = violations as f64 / reps;
                BoundCoverage {
                    label: label.clone(),
                    violations,
                    violation_rate: rate,
                    std_error: (rate * (1.0 - rate) / reps).sqrt(),
                    threshold,
                }
            })
            .collect();
        Ok(CoverageReport {
            reps: cfg.reps,
            horizon: cfg.horizon,
            delta,
            bounds,
        })
    }
}

fn thread_override() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(format!("{THREADS_ENV} = `{v}` is not a positive integer"))
            }),
        Err(_) => Ok(None),
    }
}

/// Validates `config` and runs replication `rep`.
pub fn run_trajectory(config: &ExperimentConfig, rep: u64) -> Result<Trace> {
    Experiment::new(config.clone())?.run(rep)
}

/// Validates `config` and measures coverage over `reps` replications.
pub fn coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    Experiment::new(config.clone())?.coverage()
}

/// Header `bound,reps,horizon,delta,violations,violation_rate,std_error,threshold,pass`.
pub fn write_coverage_csv<W: Write>(report: &CoverageReport, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bound",
        "reps",
        "horizon",
        "delta",
        "violations",
        "violation_rate",
        "std_error",
        "threshold",
        "pass",
    ])?;
    for b in &report.bounds {
        w.write_record([
            b.label.clone(),
            report.reps.to_string(),
            report.horizon.to_string(),
            report.delta.to_string(),
            b.violations.to_string(),
            b.violation_rate.to_string(),
            b.std_error.to_string(),
            b.threshold.to_string(),
            b.pass().to_string(),
        ])?;
    }
    w.flush()
}

/// Header `t,bound,lhs,rhs,kl,violated`.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "bound", "lhs", "rhs", "kl", "violated"])?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            trace.labels[r.bound].clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.kl.to_string(),
            r.violated.to_string(),
        ])?;
    }
    w.flush()
}
