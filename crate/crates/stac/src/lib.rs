//! Propositional model counting from satisfiability queries.
//!
//! The central estimator answers "how many models does this CNF formula
//! have?" by repeatedly conjoining random parity constraints onto the
//! formula and recording how many are needed before it becomes
//! unsatisfiable. Each added constraint halves the expected model count, so
//! the depth at which a formula dies encodes its size; unlike
//! enumeration-based approximate counters, every probe is a single yes/no
//! satisfiability query.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: deterministic splittable random streams, so every experiment
//!   cell replays from a master seed.
//! - [`formula`]: CNF with native parity constraints, DIMACS parsing and
//!   emission, and a random 3-CNF generator.
//! - [`solver`]: a small DPLL solver with watched-literal propagation and
//!   incremental parity reasoning over the XOR rows.
//! - [`hashing`]: the random parity-constraint family and lazily extended
//!   constraint chains.
//! - [`oracle`]: exact counting (bit-sweep or blocking-clause enumeration)
//!   and the bounded counting query.
//! - [`stats`]: run-count tables, normal quantiles, binomial proportion
//!   intervals, and the depth-to-count transform.
//! - [`counters`]: the depth-sampling estimators, with fixed run counts
//!   ([`counters::stac`]) or a dynamic stopping rule
//!   ([`counters::stac_dsc`]), plus the leap-frog probe heuristic.
//! - [`approxmc`]: an enumeration-based hashing counter in the ApproxMC
//!   style, kept as a query-cost baseline.
//! - [`validation`]: exact and Monte-Carlo machinery for checking the
//!   depth-probability model against an idealized subset-sampling family.
//! - [`harness`]: experiment orchestration, frequency scoring against exact
//!   counts, and JSON/CSV reporting.

pub mod approxmc;
pub mod counters;
pub mod formula;
pub mod harness;
pub mod hashing;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod validation;

pub use counters::{stac, stac_dsc, CountEstimate, CounterOptions};
pub use formula::{parse_dimacs, CnfFormula};
pub use oracle::count_exact;
pub use stats::{compute_t, AccuracyParams, IntervalMethod};
