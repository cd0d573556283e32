//! Experiment orchestration and machine-readable reporting.
//!
//! An [`ExperimentConfig`] names a set of instances, a counting algorithm,
//! and the accuracy settings; [`run_experiment`] executes the configured
//! counter `repetitions` times per instance on seeds derived from the master
//! seed and aggregates the outcomes into an [`ExperimentReport`]. Every cell
//! of the grid gets the stream path (master, instance index, repetition
//! index), so any single repetition can be replayed in isolation and the
//! whole report is reproducible byte for byte apart from wall-clock fields.
//!
//! Reports serialize to JSON (full fidelity, raw per-repetition estimates
//! included so frequencies can be recomputed offline) and to CSV with a
//! fixed column order for plotting. Worker parallelism spans repetitions;
//! the `STAC_WORKERS` environment variable caps the pool when the config
//! leaves the worker count at zero.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use num::{BigUint, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approxmc::{approxmc, default_pivot};
use crate::counters::{stac, stac_dsc, CounterOptions};
use crate::formula::{generate_random_3cnf, parse_dimacs, CnfFormula, FormulaError, ParseError};
use crate::oracle::{ExactOracle, OracleError};
use crate::rng::RngStream;
use crate::solver::SolverError;
use crate::stats::{compute_t, AccuracyParams, IntervalMethod, StatsError};

/// Counting algorithm an experiment exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Fixed-run depth-sampling counter.
    Stac,
    /// Depth-sampling counter with the dynamic stopping rule.
    StacDsc,
    /// Enumeration-based baseline.
    Approxmc,
    /// Exact oracle; every repetition reports the true count.
    Exact,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Stac => "stac",
            Algorithm::StacDsc => "stac-dsc",
            Algorithm::Approxmc => "approxmc",
            Algorithm::Exact => "exact",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stac" => Ok(Algorithm::Stac),
            "stac-dsc" => Ok(Algorithm::StacDsc),
            "approxmc" => Ok(Algorithm::Approxmc),
            "exact" => Ok(Algorithm::Exact),
            other => Err(format!(
                "unknown algorithm {other:?}; expected stac, stac-dsc, approxmc, or exact"
            )),
        }
    }
}

/// Report serialization format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format {other:?}; expected json or csv")),
        }
    }
}

/// One benchmark instance: a DIMACS file on disk or a generator call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    File { path: PathBuf },
    Generated { num_vars: u32, num_clauses: u32, seed: u64 },
}

impl InstanceSpec {
    /// Stable display name used in report rows.
    pub fn name(&self) -> String {
        match self {
            InstanceSpec::File { path } => path.display().to_string(),
            InstanceSpec::Generated {
                num_vars,
                num_clauses,
                seed,
            } => format!("random-{num_vars}v-{num_clauses}c-{seed}"),
        }
    }

    fn load(&self) -> Result<CnfFormula, HarnessError> {
        match self {
            InstanceSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_dimacs(&text).map_err(|source| HarnessError::Parse {
                    path: path.clone(),
                    source,
                })
            }
            InstanceSpec::Generated {
                num_vars,
                num_clauses,
                seed,
            } => Ok(generate_random_3cnf(*num_vars, *num_clauses, *seed)?),
        }
    }
}

/// Full description of one experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instances: Vec<InstanceSpec>,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub delta: f64,
    /// Independent repetitions per instance; at least 1.
    pub repetitions: u32,
    pub master_seed: u64,
    pub interval_method: IntervalMethod,
    pub leapfrog: bool,
    pub offset: u32,
    /// Worker threads; 0 defers to `STAC_WORKERS` or the machine width.
    pub workers: usize,
    pub solve_budget: Option<u64>,
    /// Overrides the run count derived from epsilon and delta.
    pub runs_override: Option<u64>,
    /// Overrides the enumeration pivot derived from epsilon.
    pub pivot_override: Option<u64>,
    pub output: OutputFormat,
}

/// Aggregated outcomes for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub num_vars: u32,
    /// Exact model count in decimal; absent when the oracle's caps exclude
    /// the instance, in which case no frequency can be checked.
    pub exact_count: Option<String>,
    /// Raw per-repetition estimates, in repetition order.
    pub estimates: Vec<f64>,
    pub mean_estimate: f64,
    pub median_estimate: f64,
    /// How many estimates landed inside the target interval.
    pub frequency_in_interval: Option<u32>,
    pub mean_time_s: f64,
    /// Mean depth-sampling runs (or core runs) per repetition.
    pub mean_runs: f64,
    /// Mean satisfiability queries per repetition.
    pub mean_queries: f64,
    pub master_seed: u64,
}

/// Report for a whole experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub versions: BTreeMap<String, String>,
    /// UTC timestamp; excluded from replay comparisons.
    pub started_at: String,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("the report schema serializes")
    }

    /// CSV with one row per instance and this fixed column order:
    /// instance, num_vars, exact_count, repetitions, frequency_in_interval,
    /// mean_estimate, median_estimate, mean_time_s, mean_runs, mean_queries,
    /// master_seed, estimates (semicolon-joined).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance,num_vars,exact_count,repetitions,frequency_in_interval,\
             mean_estimate,median_estimate,mean_time_s,mean_runs,mean_queries,\
             master_seed,estimates\n",
        );
        for row in &self.rows {
            let estimates = row
                .estimates
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.instance,
                row.num_vars,
                row.exact_count.as_deref().unwrap_or(""),
                self.config.repetitions,
                row.frequency_in_interval
                    .map(|f| f.to_string())
                    .unwrap_or_default(),
                row.mean_estimate,
                row.median_estimate,
                row.mean_time_s,
                row.mean_runs,
                row.mean_queries,
                row.master_seed,
                estimates,
            ));
        }
        out
    }

    /// Copy with the wall-clock fields cleared, so two runs of the same
    /// config compare byte-identical.
    pub fn normalized_for_replay(&self) -> ExperimentReport {
        let mut copy = self.clone();
        copy.started_at = String::new();
        for row in &mut copy.rows {
            row.mean_time_s = 0.0;
        }
        copy
    }
}

/// Reasons an experiment cannot run to completion.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("exact counting failed on {instance}: {source}")]
    ExactUnavailable {
        instance: String,
        #[source]
        source: OracleError,
    },
    #[error("no repetitions requested")]
    NoRepetitions,
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn resolve_workers(configured: usize) -> usize {
    if configured > 0 {
        return configured;
    }
    if let Ok(value) = std::env::var("STAC_WORKERS") {
        if let Ok(parsed) = value.parse::<usize>() {
            if parsed > 0 {
                return parsed;
            }
        }
    }
    std::thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1)
}

/// Outcome of a single repetition before aggregation.
struct Repetition {
    estimate: f64,
    runs: u64,
    queries: u64,
    seconds: f64,
}

fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Runs the configured experiment with the default exact oracle.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    run_experiment_with_oracle(cfg, &ExactOracle::default())
}

/// Runs the configured experiment, using `oracle` for the ground-truth
/// counts that the frequency column is checked against.
pub fn run_experiment_with_oracle(
    cfg: &ExperimentConfig,
    oracle: &ExactOracle,
) -> Result<ExperimentReport, HarnessError> {
    if cfg.repetitions < 1 {
        return Err(HarnessError::NoRepetitions);
    }
    let params = AccuracyParams::new(cfg.epsilon, cfg.delta)?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(cfg.workers))
        .build()?;
    let master = RngStream::from_seed(cfg.master_seed);
    let rows = pool.install(|| -> Result<Vec<ReportRow>, HarnessError> {
        cfg.instances
            .iter()
            .enumerate()
            .map(|(index, spec)| run_instance(cfg, &params, oracle, &master, index as u64, spec))
            .collect()
    })?;
    let mut versions = BTreeMap::new();
    versions.insert("stac".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("report-schema".to_string(), "1".to_string());
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        versions,
        started_at,
    })
}

fn run_instance(
    cfg: &ExperimentConfig,
    params: &AccuracyParams,
    oracle: &ExactOracle,
    master: &RngStream,
    instance_index: u64,
    spec: &InstanceSpec,
) -> Result<ReportRow, HarnessError> {
    let formula = spec.load()?;
    let exact = match oracle.count(&formula) {
        Ok(count) => Some(count),
        Err(OracleError::CapExceeded { .. }) => None,
        Err(source) => {
            return Err(HarnessError::ExactUnavailable {
                instance: spec.name(),
                source,
            })
        }
    };
    if cfg.algorithm == Algorithm::Exact && exact.is_none() {
        return Err(HarnessError::ExactUnavailable {
            instance: spec.name(),
            source: OracleError::CapExceeded {
                num_vars: formula.num_vars(),
                exhaustive_cap: oracle.exhaustive_cap,
                enumeration_cap: oracle.enumeration_cap,
            },
        });
    }
    let runs = cfg.runs_override.unwrap_or_else(|| compute_t(params));
    let pivot = cfg
        .pivot_override
        .unwrap_or_else(|| default_pivot(cfg.epsilon));
    let options = CounterOptions {
        leapfrog: cfg.leapfrog,
        offset: cfg.offset,
        solve_budget: cfg.solve_budget,
    };
    let instance_stream = master.derive(instance_index);
    let repetitions: Vec<Repetition> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<Repetition, HarnessError> {
            let seed = instance_stream.derive(u64::from(rep)).fingerprint();
            let clock = Instant::now();
            let outcome = match cfg.algorithm {
                Algorithm::Stac => {
                    let result = stac(&formula, runs, seed, &options)?;
                    Repetition {
                        estimate: result.estimate,
                        runs: result.runs_used,
                        queries: result.sat_queries,
                        seconds: clock.elapsed().as_secs_f64(),
                    }
                }
                Algorithm::StacDsc => {
                    let result =
                        stac_dsc(&formula, runs, params, cfg.interval_method, seed, &options)?;
                    Repetition {
                        estimate: result.estimate,
                        runs: result.runs_used,
                        queries: result.sat_queries,
                        seconds: clock.elapsed().as_secs_f64(),
                    }
                }
                Algorithm::Approxmc => {
                    let result =
                        approxmc(&formula, runs as u32, pivot, seed, cfg.solve_budget)?;
                    Repetition {
                        estimate: result.estimate.to_f64().unwrap_or(f64::INFINITY),
                        runs: u64::from(result.runs),
                        queries: result.solve_calls,
                        seconds: clock.elapsed().as_secs_f64(),
                    }
                }
                Algorithm::Exact => {
                    let count = exact.as_ref().expect("checked above");
                    Repetition {
                        estimate: count.to_f64().unwrap_or(f64::INFINITY),
                        runs: 1,
                        queries: 0,
                        seconds: clock.elapsed().as_secs_f64(),
                    }
                }
            };
            Ok(outcome)
        })
        .collect::<Result<_, _>>()?;
    let estimates: Vec<f64> = repetitions.iter().map(|r| r.estimate).collect();
    let frequency = exact.as_ref().map(|count| {
        let truth = count.to_f64().expect("desk-scale counts fit in f64");
        let lower = truth / (1.0 + cfg.epsilon);
        let upper = truth * (1.0 + cfg.epsilon);
        estimates
            .iter()
            .filter(|e| (lower..=upper).contains(*e))
            .count() as u32
    });
    let mut sorted = estimates.clone();
    sorted.sort_by(f64::total_cmp);
    let reps = cfg.repetitions as f64;
    Ok(ReportRow {
        instance: spec.name(),
        num_vars: formula.num_vars(),
        exact_count: exact.as_ref().map(BigUint::to_string),
        mean_estimate: estimates.iter().sum::<f64>() / reps,
        median_estimate: lower_median(&sorted),
        estimates,
        frequency_in_interval: frequency,
        mean_time_s: repetitions.iter().map(|r| r.seconds).sum::<f64>() / reps,
        mean_runs: repetitions.iter().map(|r| r.runs as f64).sum::<f64>() / reps,
        mean_queries: repetitions.iter().map(|r| r.queries as f64).sum::<f64>() / reps,
        master_seed: cfg.master_seed,
    })
}
