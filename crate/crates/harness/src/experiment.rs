//! Seeded Monte Carlo runs over a delta grid.

use boxed_bandit::allocation::{self, WStarSet};
use boxed_bandit::bbmts::{self, BbmtsConfig, BbmtsError};
use boxed_bandit::bbsea::{self, BbseaError};
use boxed_bandit::threshold::{Threshold, ThresholdError};
use boxed_bandit::{RunOutcome, SolverResult, TracePoint};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Algorithm, ExperimentConfig};

/// Relative slack of the reference optimizer set used for tracking distances.
const WSTAR_REL_EPS: f64 = 1e-6;
const REFERENCE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot build a worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("threshold: {0}")]
    Threshold(#[from] ThresholdError),
    #[error("reference solve failed: {0}")]
    Reference(#[from] allocation::SolverError),
    #[error("{0}")]
    Bbsea(BbseaError),
    #[error("trial with seed {seed} failed: {message}")]
    Trial { seed: u64, message: String },
}

/// What one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub seed: u64,
    pub delta: f64,
    pub tau: u64,
    pub declared: Option<usize>,
    pub correct: bool,
    /// The run hit `max_steps`; `tau` is the cap and nothing was declared.
    pub capped: bool,
    /// `d_inf(N / tau, W*)` at the end of a bbmts run.
    pub final_tracking_distance: Option<f64>,
    pub trace: Vec<TracePoint>,
}

/// Instance-level reference quantities reported next to the aggregates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    TStar(f64),
    /// Upper bound `sum_m beta_m` and the partition lower bound, per delta.
    Bounds {
        upper: f64,
        lower: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub delta: f64,
    pub trials: u64,
    /// Share of trials that did not declare the best arm; capped trials
    /// count as errors.
    pub error_rate: f64,
    /// Over trials that stopped.
    pub mean_tau: f64,
    pub stddev_tau: f64,
    /// `mean_tau / ln(1 / delta)`.
    pub slope: f64,
    pub reference: Reference,
    pub tracking_distance: Option<f64>,
    pub capped: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<AggregateRow>,
    /// Grouped by delta in grid order, then by seed.
    pub trials: Vec<TrialRow>,
    pub t_star: Option<SolverResult>,
}

impl ExperimentOutput {
    pub fn capped_trials(&self) -> u64 {
        self.rows.iter().map(|r| r.capped).sum()
    }
}

/// Runs every trial of every grid point on `workers` threads.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| match config.algorithm {
        Algorithm::Bbmts => run_bbmts(config),
        Algorithm::Bbsea => run_bbsea(config),
    })
}

/// Trial `i` uses seed `base_seed + i`.
fn seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.trials)
        .map(|i| config.base_seed.wrapping_add(i))
        .collect()
}

fn run_bbmts(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let instance = &config.instance;
    let solution = allocation::solve(instance, REFERENCE_TOL)?;
    let eps = WSTAR_REL_EPS * solution.t_star + 1e-12;
    let reference = WStarSet::new(&instance.characteristic_problem(), &solution, eps);
    let rho = config.rho.unwrap_or(1.0);
    // C depends only on (K, rho): computed once for the whole grid.
    let base = Threshold::new(
        config.threshold,
        instance.num_arms(),
        rho,
        config.delta_grid[0],
    )?;

    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for &delta in &config.delta_grid {
        let mut run_config = BbmtsConfig::new(base.with_delta(delta)?);
        run_config.max_steps = config.max_steps;
        run_config.resolve = config.resolve;
        run_config.member_rule = config.member_rule;
        run_config.horizon = config.horizon;
        run_config.trace_every = config.trace_every;

        let results: Vec<Result<TrialRow, ExperimentError>> = seeds(config)
            .into_par_iter()
            .map(|seed| {
                let outcome = bbmts::run(instance, &run_config, seed, Some(&reference));
                match outcome {
                    Ok(out) => {
                        let tau = out.tau.max(1) as f64;
                        let freq: Vec<f64> =
                            out.box_counts.iter().map(|&n| n as f64 / tau).collect();
                        let distance = reference.distance(&freq).map(|d| d.distance).ok();
                        Ok(completed(seed, delta, out, distance))
                    }
                    Err(BbmtsError::CapExceeded { max_steps }) => {
                        Ok(capped(seed, delta, max_steps))
                    }
                    Err(e) => Err(ExperimentError::Trial {
                        seed,
                        message: e.to_string(),
                    }),
                }
            })
            .collect();
        let group = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        rows.push(aggregate(delta, &group, Reference::TStar(solution.t_star)));
        trials.extend(group);
    }
    Ok(ExperimentOutput {
        rows,
        trials,
        t_star: Some(solution),
    })
}

fn run_bbsea(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let instance = &config.instance;
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for &delta in &config.delta_grid {
        let bounds = bbsea::theory_bounds(instance, delta).map_err(ExperimentError::Bbsea)?;
        let results: Vec<Result<TrialRow, ExperimentError>> = seeds(config)
            .into_par_iter()
            .map(
                |seed| match bbsea::run(instance, delta, seed, config.max_steps) {
                    Ok(out) => Ok(completed(seed, delta, out, None)),
                    Err(BbseaError::CapExceeded { max_steps }) => {
                        Ok(capped(seed, delta, max_steps))
                    }
                    Err(e) => Err(ExperimentError::Trial {
                        seed,
                        message: e.to_string(),
                    }),
                },
            )
            .collect();
        let group = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let reference = Reference::Bounds {
            upper: bounds.upper_bound,
            lower: bounds.lower_bound,
        };
        rows.push(aggregate(delta, &group, reference));
        trials.extend(group);
    }
    Ok(ExperimentOutput {
        rows,
        trials,
        t_star: None,
    })
}

fn completed(seed: u64, delta: f64, out: RunOutcome, distance: Option<f64>) -> TrialRow {
    TrialRow {
        seed,
        delta,
        tau: out.tau,
        declared: Some(out.declared_arm),
        correct: out.correct,
        capped: false,
        final_tracking_distance: distance,
        trace: out.trace,
    }
}

fn capped(seed: u64, delta: f64, max_steps: u64) -> TrialRow {
    TrialRow {
        seed,
        delta,
        tau: max_steps,
        declared: None,
        correct: false,
        capped: true,
        final_tracking_distance: None,
        trace: Vec::new(),
    }
}

/// Folds seed-ordered trial rows into one aggregate.
pub fn aggregate(delta: f64, group: &[TrialRow], reference: Reference) -> AggregateRow {
    let trials = group.len() as u64;
    let errors = group.iter().filter(|r| !r.correct).count();
    let stopped: Vec<f64> = group
        .iter()
        .filter(|r| !r.capped)
        .map(|r| r.tau as f64)
        .collect();
    let (mean_tau, stddev_tau) = mean_and_stddev(&stopped);
    let distances: Vec<f64> = group
        .iter()
        .filter_map(|r| r.final_tracking_distance)
        .collect();
    let tracking_distance = (!distances.is_empty()).then(|| mean_and_stddev(&distances).0);
    AggregateRow {
        delta,
        trials,
        error_rate: if trials == 0 {
            0.0
        } else {
            errors as f64 / trials as f64
        },
        mean_tau,
        stddev_tau,
        slope: mean_tau / (1.0 / delta).ln(),
        reference,
        tracking_distance,
        capped: group.iter().filter(|r| r.capped).count() as u64,
    }
}

/// Mean and sample standard deviation (zero for a single value, NaN for none).
pub fn mean_and_stddev(xs: &[f64]) -> (f64, f64) {
    match xs.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (xs[0], 0.0),
        n => {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        }
    }
}
