//! Exact model counting and bounded model enumeration.
//!
//! Small formulas are counted by an exhaustive sweep that walks assignments
//! in Gray-code order, so each step flips one variable and updates clause
//! and parity tallies incrementally. Larger formulas fall back to solver
//! enumeration with blocking clauses, which is exact but only viable while
//! the model count stays moderate; past a configurable ceiling the count is
//! reported as unavailable rather than wrong.

use num::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::formula::{Clause, CnfFormula, Lit, XorConstraint};
use crate::solver::{Solver, SolverError, Status};

/// Widest formula the exhaustive sweep will take on.
pub const DEFAULT_EXHAUSTIVE_CAP: u32 = 26;

/// Most models blocking-clause enumeration will discover before giving up.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "{num_vars} variables exceed the exhaustive cap of {exhaustive_cap}, and enumeration \
         passed {enumeration_cap} models without finishing"
    )]
    CapExceeded {
        num_vars: u32,
        exhaustive_cap: u32,
        enumeration_cap: u64,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Exact counter with configurable effort ceilings.
#[derive(Clone, Copy, Debug)]
pub struct ExactOracle {
    pub exhaustive_cap: u32,
    pub enumeration_cap: u64,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle {
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl ExactOracle {
    /// Exact model count, or an error when the formula is too wide to sweep
    /// and holds more models than the enumeration ceiling.
    pub fn count(&self, formula: &CnfFormula) -> Result<BigUint, OracleError> {
        if formula.num_vars() <= self.exhaustive_cap {
            return Ok(exhaustive_count(formula));
        }
        let outcome = bounded_count(formula, &[], self.enumeration_cap + 1, None)?;
        if outcome.saturated {
            return Err(OracleError::CapExceeded {
                num_vars: formula.num_vars(),
                exhaustive_cap: self.exhaustive_cap,
                enumeration_cap: self.enumeration_cap,
            });
        }
        Ok(BigUint::from(outcome.count))
    }
}

/// Exact model count with the default effort ceilings.
pub fn count_exact(formula: &CnfFormula) -> Result<BigUint, OracleError> {
    ExactOracle::default().count(formula)
}

/// Result of bounded enumeration: `count` models were found; `saturated`
/// means the threshold stopped the search, so the true count may be larger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundedCount {
    pub count: u64,
    pub saturated: bool,
    pub solve_calls: u64,
}

/// Enumerates models of `formula` conjoined with `extra_xors`, stopping at
/// `threshold - 1` models. Uses at most `threshold` solve calls: each model
/// costs one call and the proof that none remain costs one more.
pub fn bounded_count(
    formula: &CnfFormula,
    extra_xors: &[XorConstraint],
    threshold: u64,
    budget: Option<u64>,
) -> Result<BoundedCount, SolverError> {
    assert!(threshold >= 2, "a threshold below 2 answers nothing");
    let mut solver = Solver::new(formula, extra_xors);
    let mut count = 0u64;
    let mut solve_calls = 0u64;
    loop {
        solve_calls += 1;
        let result = solver.solve(&[], budget)?;
        if result.status == Status::Unsat {
            return Ok(BoundedCount {
                count,
                saturated: false,
                solve_calls,
            });
        }
        count += 1;
        if count == threshold - 1 {
            return Ok(BoundedCount {
                count,
                saturated: true,
                solve_calls,
            });
        }
        let witness = result.witness.expect("sat result carries a witness");
        let block: Vec<Lit> = (1..=formula.num_vars())
            .map(|v| Lit::new(v, witness.value(v)))
            .collect();
        solver
            .add_clause(&Clause::new(block).expect("formulas have at least one variable"))
            .expect("blocking literals are in range");
    }
}

/// Answers "does the formula have at least `threshold` models, and if not,
/// how many?": returns `min(threshold - 1, count)`.
pub fn counting_query(
    formula: &CnfFormula,
    threshold: u64,
    budget: Option<u64>,
) -> Result<u64, SolverError> {
    bounded_count(formula, &[], threshold, budget).map(|b| b.count)
}

/// Per-variable incidence tables for the incremental sweep.
struct SweepTables {
    /// For each variable (0-based): clauses it appears in, with the sign.
    var_clauses: Vec<Vec<(u32, bool)>>,
    /// For each variable (0-based): parity rows it appears in.
    var_xors: Vec<Vec<u32>>,
}

impl SweepTables {
    fn build(formula: &CnfFormula) -> SweepTables {
        let n = formula.num_vars() as usize;
        let mut var_clauses = vec![Vec::new(); n];
        let mut var_xors = vec![Vec::new(); n];
        for (cid, clause) in formula.clauses().iter().enumerate() {
            for lit in clause.literals() {
                var_clauses[lit.var() as usize - 1].push((cid as u32, lit.is_negative()));
            }
        }
        for (xid, xor) in formula.xors().iter().enumerate() {
            for &v in xor.vars() {
                var_xors[v as usize - 1].push(xid as u32);
            }
        }
        SweepTables {
            var_clauses,
            var_xors,
        }
    }
}

/// Counts models among the `2^free_bits` assignments whose low `free_bits`
/// variables take every value and whose remaining variables are fixed by
/// `base`.
fn sweep_block(formula: &CnfFormula, tables: &SweepTables, base: u64, free_bits: u32) -> u64 {
    let value_of = |bits: u64, var0: usize| bits >> var0 & 1 == 1;

    let mut true_lits: Vec<u32> = formula
        .clauses()
        .iter()
        .map(|c| {
            c.literals()
                .iter()
                .filter(|l| value_of(base, l.var() as usize - 1) != l.is_negative())
                .count() as u32
        })
        .collect();
    let mut unsat_clauses = true_lits.iter().filter(|&&c| c == 0).count() as u64;

    let mut parity: Vec<bool> = formula
        .xors()
        .iter()
        .map(|x| {
            x.vars()
                .iter()
                .fold(false, |p, &v| p ^ value_of(base, v as usize - 1))
        })
        .collect();
    let mut violated_xors = parity
        .iter()
        .zip(formula.xors())
        .filter(|(&p, x)| p != x.rhs())
        .count() as u64;

    let mut bits = base;
    let mut models = 0u64;
    let total: u64 = 1 << free_bits;
    for step in 0..total {
        if step > 0 {
            // Gray-code successor: flip the lowest set bit position of step.
            let var0 = step.trailing_zeros() as usize;
            bits ^= 1 << var0;
            let now_true = value_of(bits, var0);
            for &(cid, negated) in &tables.var_clauses[var0] {
                let lit_true = now_true != negated;
                let slot = &mut true_lits[cid as usize];
                if lit_true {
                    *slot += 1;
                    if *slot == 1 {
                        unsat_clauses -= 1;
                    }
                } else {
                    *slot -= 1;
                    if *slot == 0 {
                        unsat_clauses += 1;
                    }
                }
            }
            for &xid in &tables.var_xors[var0] {
                let p = &mut parity[xid as usize];
                *p = !*p;
                if *p == formula.xors()[xid as usize].rhs() {
                    violated_xors -= 1;
                } else {
                    violated_xors += 1;
                }
            }
        }
        if unsat_clauses == 0 && violated_xors == 0 {
            models += 1;
        }
    }
    models
}

/// Exact model count by exhaustive sweep. Intended for formulas whose width
/// makes `2^n` walkable; wide sweeps split across threads.
pub fn exhaustive_count(formula: &CnfFormula) -> BigUint {
    let n = formula.num_vars();
    assert!(n < 64, "exhaustive sweep needs an indexable space");
    let tables = SweepTables::build(formula);
    // Blocks of 2^20 assignments keep per-task state in cache and give the
    // thread pool enough pieces to balance.
    let block_bits = n.min(20);
    let blocks: u64 = 1 << (n - block_bits);
    let total: u64 = if blocks == 1 {
        sweep_block(formula, &tables, 0, block_bits)
    } else {
        (0..blocks)
            .into_par_iter()
            .map(|prefix| sweep_block(formula, &tables, prefix << block_bits, block_bits))
            .sum()
    };
    BigUint::from(total)
}
