//! Command-line interface: estimate counts, run benchmark grids, generate
//! instances, and tabulate the statistical reference values.
//!
//! Exit codes: 0 on success, 1 on a command-line usage error, 2 on a runtime
//! failure such as an unreadable or malformed input file.

use std::path::PathBuf;

use anyhow::Context;
use clap::{ArgAction, Parser, Subcommand};
use num::{BigUint, ToPrimitive};
use serde::Serialize;

use stac::approxmc::{approxmc, default_pivot};
use stac::counters::{stac as run_stac, stac_dsc as run_stac_dsc, CounterOptions};
use stac::formula::{emit_dimacs, generate_random_3cnf, parse_dimacs, CnfFormula};
use stac::harness::{run_experiment, Algorithm, ExperimentConfig, InstanceSpec, OutputFormat};
use stac::oracle::ExactOracle;
use stac::stats::{compute_t, q_of, AccuracyParams, ConfidenceInterval, IntervalMethod};
use stac::validation::{compare_limit, hypergeometric_unsat_prob, sample_g_family_unsat};

#[derive(Parser)]
#[command(
    name = "stac",
    version,
    about = "Model counting from satisfiability queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate or exactly compute the model count of one DIMACS file.
    Count(CountArgs),
    /// Run a benchmark grid and emit a JSON or CSV report.
    Bench(BenchArgs),
    /// Generate a random 3-CNF instance.
    Gen(GenArgs),
    /// Compare exact avoidance probabilities with the large-space limit,
    /// or Monte-Carlo a formula against both references.
    Validate(ValidateArgs),
    /// Print static run counts for accuracy settings as CSV.
    TableT(TableTArgs),
}

#[derive(clap::Args)]
struct CountArgs {
    /// DIMACS CNF input file.
    file: PathBuf,
    #[arg(long, default_value_t = Algorithm::StacDsc)]
    algorithm: Algorithm,
    /// Multiplicative accuracy target.
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the run count derived from epsilon and delta.
    #[arg(long)]
    runs: Option<u64>,
    /// Override the enumeration pivot derived from epsilon.
    #[arg(long)]
    pivot: Option<u64>,
    /// Binomial interval the stopping rule consults.
    #[arg(long, default_value_t = IntervalMethod::Wilson)]
    method: IntervalMethod,
    /// Probe every depth from zero instead of warm-starting.
    #[arg(long)]
    no_leapfrog: bool,
    /// Warm-start jump width.
    #[arg(long, default_value_t = 5)]
    offset: u32,
    /// Per-solve work budget (decisions plus propagations).
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// DIMACS files to benchmark.
    files: Vec<PathBuf>,
    /// Generated instance as three integers: vars, clauses, seed. Repeat
    /// the flag for more instances; they follow any files in the report.
    #[arg(long, num_args = 3, value_names = ["VARS", "CLAUSES", "SEED"], action = ArgAction::Append)]
    generate: Vec<u64>,
    #[arg(long, default_value_t = Algorithm::StacDsc)]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Repetitions per instance.
    #[arg(long, default_value_t = 100)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = IntervalMethod::Wilson)]
    method: IntervalMethod,
    #[arg(long)]
    no_leapfrog: bool,
    #[arg(long, default_value_t = 5)]
    offset: u32,
    /// Worker threads; 0 defers to STAC_WORKERS or the machine width.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    pivot: Option<u64>,
    #[arg(long, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Variable count (at least 3).
    #[arg(long)]
    n: u32,
    /// Clause count.
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the instance here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    /// Variable counts for the convergence table.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    grid: Vec<u32>,
    /// Marked-point count for the convergence table.
    #[arg(long, default_value_t = 2)]
    count: u64,
    /// Number of half-space draws per trial.
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Monte-Carlo this formula instead of printing the table.
    #[arg(long)]
    formula: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct TableTArgs {
    /// Tabulate a whole grid of accuracy settings.
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
}

/// Command-line misuse that clap's parser cannot detect on its own.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Count(args) => cmd_count(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Validate(args) => cmd_validate(args),
        Command::TableT(args) => cmd_table_t(args),
    };
    if let Err(err) = result {
        let code = if err.downcast_ref::<UsageError>().is_some() {
            1
        } else {
            2
        };
        eprintln!("error: {err:#}");
        std::process::exit(code);
    }
}

fn read_formula(path: &PathBuf) -> anyhow::Result<CnfFormula> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("failed to read {}", path.display()))?;
    parse_dimacs(&text).with_context(|| path.display().to_string())
}

fn write_output(path: Option<&PathBuf>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("failed to write {}", path.display())),
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct CountOutput {
    file: String,
    algorithm: String,
    num_vars: u32,
    estimate: f64,
    /// Exact decimal value, present for the integral algorithms.
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runs_used: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sat_queries: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopped_early: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<ConfidenceInterval>,
    epsilon: f64,
    delta: f64,
    seed: u64,
}

fn cmd_count(args: CountArgs) -> anyhow::Result<()> {
    let formula = read_formula(&args.file)?;
    let params = AccuracyParams::new(args.epsilon, args.delta)?;
    let options = CounterOptions {
        leapfrog: !args.no_leapfrog,
        offset: args.offset,
        solve_budget: args.budget,
    };
    let runs = args.runs.unwrap_or_else(|| compute_t(&params));
    let mut out = CountOutput {
        file: args.file.display().to_string(),
        algorithm: args.algorithm.to_string(),
        num_vars: formula.num_vars(),
        estimate: 0.0,
        count: None,
        chosen_depth: None,
        runs_used: None,
        sat_queries: None,
        stopped_early: None,
        interval: None,
        epsilon: args.epsilon,
        delta: args.delta,
        seed: args.seed,
    };
    match args.algorithm {
        Algorithm::Stac => {
            let result = run_stac(&formula, runs, args.seed, &options)?;
            out.estimate = result.estimate;
            out.chosen_depth = Some(result.chosen_depth);
            out.runs_used = Some(result.runs_used);
            out.sat_queries = Some(result.sat_queries);
            out.stopped_early = Some(result.stopped_early);
            out.interval = result.interval;
        }
        Algorithm::StacDsc => {
            let result = run_stac_dsc(&formula, runs, &params, args.method, args.seed, &options)?;
            out.estimate = result.estimate;
            out.chosen_depth = Some(result.chosen_depth);
            out.runs_used = Some(result.runs_used);
            out.sat_queries = Some(result.sat_queries);
            out.stopped_early = Some(result.stopped_early);
            out.interval = result.interval;
        }
        Algorithm::Approxmc => {
            let pivot = args.pivot.unwrap_or_else(|| default_pivot(args.epsilon));
            let core_runs =
                u32::try_from(runs).context("the run count exceeds the core-run limit")?;
            let result = approxmc(&formula, core_runs, pivot, args.seed, args.budget)?;
            out.estimate = result.estimate.to_f64().unwrap_or(f64::INFINITY);
            out.count = Some(result.estimate.to_string());
            out.runs_used = Some(u64::from(result.runs));
            out.sat_queries = Some(result.solve_calls);
        }
        Algorithm::Exact => {
            let count = ExactOracle::default().count(&formula)?;
            out.estimate = count.to_f64().unwrap_or(f64::INFINITY);
            out.count = Some(count.to_string());
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let mut instances: Vec<InstanceSpec> = args
        .files
        .iter()
        .map(|path| InstanceSpec::File { path: path.clone() })
        .collect();
    for chunk in args.generate.chunks_exact(3) {
        instances.push(InstanceSpec::Generated {
            num_vars: u32::try_from(chunk[0]).context("generator variable count")?,
            num_clauses: u32::try_from(chunk[1]).context("generator clause count")?,
            seed: chunk[2],
        });
    }
    if instances.is_empty() {
        return Err(UsageError(
            "provide at least one DIMACS file or --generate triple".to_string(),
        )
        .into());
    }
    let cfg = ExperimentConfig {
        instances,
        algorithm: args.algorithm,
        epsilon: args.epsilon,
        delta: args.delta,
        repetitions: args.reps,
        master_seed: args.seed,
        interval_method: args.method,
        leapfrog: !args.no_leapfrog,
        offset: args.offset,
        workers: args.workers,
        solve_budget: args.budget,
        runs_override: args.runs,
        pivot_override: args.pivot,
        output: args.format,
    };
    let report = run_experiment(&cfg)?;
    let content = match args.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    write_output(args.output.as_ref(), &content)
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let formula = generate_random_3cnf(args.n, args.m, args.seed)?;
    write_output(args.output.as_ref(), &emit_dimacs(&formula))
}

#[derive(Serialize)]
struct SampleRow {
    num_vars: u32,
    models: String,
    depth: u32,
    trials: u32,
    empirical: f64,
    fixed_cell: f64,
    limit: f64,
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(path) = &args.formula {
        let formula = read_formula(path)?;
        let models = ExactOracle::default().count(&formula)?;
        let empirical = sample_g_family_unsat(&formula, args.depth, args.trials, args.seed)?;
        writer.serialize(SampleRow {
            num_vars: formula.num_vars(),
            models: models.to_string(),
            depth: args.depth,
            trials: args.trials,
            empirical,
            fixed_cell: hypergeometric_unsat_prob(formula.num_vars(), &models, args.depth)?,
            limit: q_of(args.depth, &models),
        })?;
    } else {
        let rows = compare_limit(&args.grid, &BigUint::from(args.count), args.depth)?;
        for row in rows {
            writer.serialize(row)?;
        }
    }
    let bytes = writer.into_inner().context("flushing the CSV buffer")?;
    print!("{}", String::from_utf8(bytes).expect("CSV output is UTF-8"));
    Ok(())
}

fn cmd_table_t(args: TableTArgs) -> anyhow::Result<()> {
    println!("epsilon,delta,runs");
    if args.grid {
        for epsilon in [0.1, 0.2, 0.4, 0.8, 1.0] {
            for delta in [0.05, 0.1, 0.2] {
                let runs = compute_t(&AccuracyParams::new(epsilon, delta)?);
                println!("{epsilon},{delta},{runs}");
            }
        }
    } else {
        let runs = compute_t(&AccuracyParams::new(args.epsilon, args.delta)?);
        println!("{},{},{}", args.epsilon, args.delta, runs);
    }
    Ok(())
}
