//! Statistical validation of the depth-probability model.
//!
//! The counters in this crate rest on the claim that conjoining `d` random
//! parity constraints leaves a formula with `#F` models unsatisfiable with
//! probability close to `(1 - 2^{-d})^{#F}`. This module provides the
//! machinery to test that claim against an idealized reference family whose
//! behavior is exactly computable: functions whose solution set is a uniform
//! half-sized subset of the assignment space, drawn without replacement.
//!
//! For a single draw the avoidance probability is exactly hypergeometric and
//! [`hypergeometric_unsat_prob_exact`] evaluates it in big-rational
//! arithmetic. For `d > 1` the intersection of independent draws is a random
//! set whose size has mean `2^{n-d}` but is not fixed, so the fixed-cell
//! probability no longer applies exactly; [`sample_g_family_unsat`] estimates
//! the true intersection behavior by Monte Carlo so it can be compared with
//! both the fixed-cell value and the infinite-space limit. [`compare_limit`]
//! tabulates how quickly the exact probability converges to that limit as the
//! space grows.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{BigRational, BigUint, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Assignment, CnfFormula};
use crate::rng::RngStream;
use crate::solver::evaluate;
use crate::stats::q_of;

/// Largest variable count accepted by the exact probability: the product has
/// up to `count` factors over a `2^n`-point space, and past 30 variables the
/// space no longer fits comfortably in machine words.
pub const EXACT_PROB_CAP: u32 = 30;

/// Largest variable count accepted by the Monte-Carlo sampler, which
/// materializes the full `2^n`-point space as bitmasks.
pub const SAMPLER_CAP: u32 = 14;

/// Reasons a validation computation cannot run.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    /// The assignment space is too large for the requested computation.
    #[error("{num_vars} variables exceed the {cap}-variable cap")]
    TooWide { num_vars: u32, cap: u32 },
    /// More marked points than the space holds.
    #[error("count {count} exceeds the 2^{num_vars}-point space")]
    CountExceedsSpace { count: BigUint, num_vars: u32 },
    /// A cell of size `2^{n-d}` requires `d` to stay within `n`.
    #[error("depth {depth} exceeds the {num_vars}-variable space")]
    DepthExceedsVars { depth: u32, num_vars: u32 },
}

/// Exact probability that a uniformly drawn `2^{n-d}`-point subset of the
/// `2^n`-point assignment space avoids a fixed set of `count` points:
/// `C(2^n - count, 2^{n-d}) / C(2^n, 2^{n-d})`, evaluated as the product of
/// `count` descending factors to keep every intermediate exactly
/// representable.
pub fn hypergeometric_unsat_prob_exact(
    num_vars: u32,
    count: &BigUint,
    depth: u32,
) -> Result<BigRational, ValidationError> {
    assert!(depth >= 1, "zero draws avoid nothing");
    if num_vars > EXACT_PROB_CAP {
        return Err(ValidationError::TooWide {
            num_vars,
            cap: EXACT_PROB_CAP,
        });
    }
    if depth > num_vars {
        return Err(ValidationError::DepthExceedsVars { depth, num_vars });
    }
    let space = 1u64 << num_vars;
    if *count > BigUint::from(space) {
        return Err(ValidationError::CountExceedsSpace {
            count: count.clone(),
            num_vars,
        });
    }
    let count = count.to_u64().expect("count fits after the space check");
    let cell = 1u64 << (num_vars - depth);
    // Once the marked points outnumber the points outside one cell, every
    // draw must hit at least one of them.
    if count > space - cell {
        return Ok(BigRational::from_integer(BigInt::from(0)));
    }
    let mut prob = BigRational::from_integer(BigInt::from(1));
    for j in 0..count {
        prob *= Ratio::new(BigInt::from(space - cell - j), BigInt::from(space - j));
    }
    Ok(prob)
}

/// Floating-point surface over [`hypergeometric_unsat_prob_exact`].
pub fn hypergeometric_unsat_prob(
    num_vars: u32,
    count: &BigUint,
    depth: u32,
) -> Result<f64, ValidationError> {
    let exact = hypergeometric_unsat_prob_exact(num_vars, count, depth)?;
    Ok(exact
        .to_f64()
        .expect("a probability in [0, 1] converts to f64"))
}

/// Draws a uniform `2^{n-1}`-point subset of the `2^n`-point space by
/// selection sampling and returns it as a bitmask, one bit per assignment
/// index. Every subset of exactly half the space is equally likely.
pub fn draw_half_subset(num_vars: u32, stream: &mut RngStream) -> Vec<u64> {
    assert!(num_vars >= 1, "the space must hold at least two points");
    assert!(
        num_vars <= SAMPLER_CAP,
        "{num_vars} variables exceed the {SAMPLER_CAP}-variable sampler cap"
    );
    let space = 1u64 << num_vars;
    let mut picks_left = space / 2;
    let mut words = vec![0u64; (space as usize).div_ceil(64)];
    for index in 0..space {
        // Include each point with probability picks_left / points_left; the
        // running counts make the final subset exactly half-sized.
        if stream.below(space - index) < picks_left {
            words[(index / 64) as usize] |= 1 << (index % 64);
            picks_left -= 1;
            if picks_left == 0 {
                break;
            }
        }
    }
    words
}

/// Monte-Carlo estimate of the probability that the intersection of `depth`
/// independently drawn half-space subsets avoids the formula's solution set
/// entirely. Trials run in parallel on independently derived streams, so the
/// result depends only on the arguments.
pub fn sample_g_family_unsat(
    formula: &CnfFormula,
    depth: u32,
    trials: u32,
    seed: u64,
) -> Result<f64, ValidationError> {
    assert!(depth >= 1, "zero draws avoid nothing");
    assert!(trials >= 1, "at least one trial is required");
    let num_vars = formula.num_vars();
    if num_vars > SAMPLER_CAP {
        return Err(ValidationError::TooWide {
            num_vars,
            cap: SAMPLER_CAP,
        });
    }
    let space = 1u64 << num_vars;
    let mut solutions = vec![0u64; (space as usize).div_ceil(64)];
    for index in 0..space {
        if evaluate(formula, &Assignment::from_index(num_vars, index)) {
            solutions[(index / 64) as usize] |= 1 << (index % 64);
        }
    }
    let master = RngStream::from_seed(seed);
    let avoided: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = master.derive(u64::from(trial));
            let mut meet = solutions.clone();
            for _ in 0..depth {
                if meet.iter().all(|w| *w == 0) {
                    break;
                }
                let subset = draw_half_subset(num_vars, &mut stream);
                for (m, s) in meet.iter_mut().zip(&subset) {
                    *m &= s;
                }
            }
            u64::from(meet.iter().all(|w| *w == 0))
        })
        .sum();
    Ok(avoided as f64 / f64::from(trials))
}

/// One row of the convergence table produced by [`compare_limit`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    /// Variable count of the assignment space.
    pub num_vars: u32,
    /// Exact fixed-cell avoidance probability at this space size.
    pub exact: f64,
    /// Infinite-space limit `(1 - 2^{-d})^{count}`.
    pub limit: f64,
    /// Absolute difference between the two.
    pub gap: f64,
}

/// Tabulates the exact avoidance probability against its infinite-space
/// limit across a grid of space sizes, with `count` and `depth` held fixed.
/// The gap shrinks as the space grows.
pub fn compare_limit(
    n_grid: &[u32],
    count: &BigUint,
    depth: u32,
) -> Result<Vec<ComparisonRow>, ValidationError> {
    let limit = q_of(depth, count);
    n_grid
        .iter()
        .map(|&num_vars| {
            let exact = hypergeometric_unsat_prob(num_vars, count, depth)?;
            Ok(ComparisonRow {
                num_vars,
                exact,
                limit,
                gap: (exact - limit).abs(),
            })
        })
        .collect()
}
