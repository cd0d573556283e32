//! Enumeration-based approximate counter in the ApproxMC style, kept as a
//! comparison baseline.
//!
//! Each core run conjoins random parity constraints onto the formula until
//! bounded enumeration certifies the residual cell's exact size, then scales
//! that size back up by the number of halvings. The top-level estimate is the
//! median of the nonzero core results. Unlike the depth-sampling counters in
//! [`crate::counters`], every probe here enumerates models instead of asking a
//! single satisfiability question, which is exactly the query-cost gap the
//! benchmark harness measures.

use num::BigUint;
use rayon::prelude::*;

use crate::formula::{CnfFormula, XorConstraint};
use crate::hashing::{draw_hash, hash_to_constraint};
use crate::oracle::bounded_count;
use crate::rng::RngStream;
use crate::solver::SolverError;

/// Outcome of a single core run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreOutcome {
    /// `residual_count << depth`; zero when the run failed (empty cell).
    pub scaled_count: BigUint,
    /// Exact model count of the final hashed cell.
    pub residual_count: u64,
    /// Number of parity constraints conjoined when enumeration succeeded.
    pub depth: u32,
    /// Total satisfiability queries spent across all enumeration attempts.
    pub solve_calls: u64,
}

/// Runs one hash-and-enumerate pass: starting from the bare formula, counts
/// models up to `pivot` and, whenever the enumeration saturates, conjoins one
/// more random parity constraint and retries. Returns the first exactly
/// counted cell scaled by `2^depth`. A zero `scaled_count` means the hashes
/// emptied the cell before enumeration ever succeeded, which the caller
/// discards.
pub fn approxmc_core(
    formula: &CnfFormula,
    pivot: u64,
    stream: &mut RngStream,
    budget: Option<u64>,
) -> Result<CoreOutcome, SolverError> {
    assert!(pivot >= 1, "a pivot below 1 certifies nothing");
    // A cell that still saturates hundreds of constraints past the variable
    // count means the constraint stream has degenerated.
    let ceiling = formula.num_vars() + 640;
    let mut constraints: Vec<XorConstraint> = Vec::new();
    let mut solve_calls = 0u64;
    loop {
        let bounded = bounded_count(formula, &constraints, pivot + 1, budget)?;
        solve_calls += bounded.solve_calls;
        if !bounded.saturated {
            let depth = constraints.len() as u32;
            return Ok(CoreOutcome {
                scaled_count: BigUint::from(bounded.count) << depth,
                residual_count: bounded.count,
                depth,
                solve_calls,
            });
        }
        constraints.push(hash_to_constraint(&draw_hash(
            formula.num_vars(),
            stream,
        )));
        assert!(
            constraints.len() as u32 <= ceiling,
            "hash chain failed to shrink the cell below the pivot"
        );
    }
}

/// Estimate produced by [`approxmc`], with the query totals the harness
/// reports alongside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxMcEstimate {
    /// Median of the nonzero core results; zero when every run failed.
    pub estimate: BigUint,
    /// Number of core runs performed.
    pub runs: u32,
    /// Satisfiability queries summed over all core runs.
    pub solve_calls: u64,
}

/// Runs [`approxmc_core`] `runs` times on independently derived streams and
/// returns the median of the nonzero results. Runs execute in parallel; the
/// per-run streams make the outcome independent of scheduling.
pub fn approxmc(
    formula: &CnfFormula,
    runs: u32,
    pivot: u64,
    seed: u64,
    budget: Option<u64>,
) -> Result<ApproxMcEstimate, SolverError> {
    assert!(runs >= 1, "at least one core run is required");
    let master = RngStream::from_seed(seed);
    let outcomes: Vec<CoreOutcome> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut stream = master.derive(u64::from(run));
            approxmc_core(formula, pivot, &mut stream, budget)
        })
        .collect::<Result<_, _>>()?;
    let solve_calls = outcomes.iter().map(|o| o.solve_calls).sum();
    let scaled: Vec<BigUint> = outcomes.into_iter().map(|o| o.scaled_count).collect();
    Ok(ApproxMcEstimate {
        estimate: median_nonzero(&scaled),
        runs,
        solve_calls,
    })
}

/// Median of the nonzero entries, taking the lower middle element when their
/// count is even. Returns zero when every entry is zero.
pub fn median_nonzero(values: &[BigUint]) -> BigUint {
    let zero = BigUint::from(0u32);
    let mut nonzero: Vec<&BigUint> = values.iter().filter(|v| **v != zero).collect();
    if nonzero.is_empty() {
        return zero;
    }
    nonzero.sort();
    nonzero[(nonzero.len() - 1) / 2].clone()
}

/// Default enumeration pivot for a target multiplicative tolerance, rounded
/// up from `9.84 * (1 + 1/epsilon)^2`. The constant is a conventional choice
/// for this family of counters, not something this crate derives.
pub fn default_pivot(epsilon: f64) -> u64 {
    assert!(epsilon > 0.0, "the tolerance must be positive");
    (9.84 * (1.0 + 1.0 / epsilon).powi(2)).ceil() as u64
}
