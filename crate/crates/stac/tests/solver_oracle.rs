//! Cross-checks the solver and the exact oracle against brute-force
//! enumeration on a corpus of small random formulas, with and without
//! parity constraints.

use num::BigUint;

use stac::formula::{Assignment, CnfFormula, XorConstraint};
use stac::formula::generate_random_3cnf;
use stac::hashing::{draw_hash, hash_to_constraint};
use stac::oracle::{bounded_count, count_exact, counting_query};
use stac::rng::RngStream;
use stac::solver::{evaluate, solve, solve_hashed, Status};

/// Model count by direct evaluation of every assignment.
fn brute_force(formula: &CnfFormula) -> u64 {
    let n = formula.num_vars();
    assert!(n <= 16, "brute force is for small formulas only");
    (0..1u64 << n)
        .filter(|&index| evaluate(formula, &Assignment::from_index(n, index)))
        .count() as u64
}

/// Random corpus entry: a 3-CNF over `n` variables with `m` clauses and
/// `k` random parity rows.
fn corpus_formula(n: u32, m: u32, k: u32, seed: u64) -> CnfFormula {
    let base = generate_random_3cnf(n, m, seed).unwrap();
    let mut stream = RngStream::from_seed(seed ^ 0x9e3779b97f4a7c15);
    let xors: Vec<XorConstraint> = (0..k)
        .map(|_| hash_to_constraint(&draw_hash(n, &mut stream)))
        .collect();
    CnfFormula::new(n, base.clauses().to_vec(), xors).unwrap()
}

#[test]
fn solver_agrees_with_brute_force_on_plain_corpus() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let n = 3 + (seed % 10) as u32;
        let m = n * (2 + (seed % 3) as u32);
        let formula = generate_random_3cnf(n, m, seed).unwrap();
        let truth = brute_force(&formula);
        let result = solve(&formula, &[], None).unwrap();
        assert_eq!(result.status == Status::Sat, truth > 0, "seed {seed}");
        if let Some(witness) = result.witness {
            assert!(evaluate(&formula, &witness), "seed {seed}");
        }
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn solver_agrees_with_brute_force_on_parity_corpus() {
    for seed in 0..60u64 {
        let n = 3 + (seed % 10) as u32;
        let m = 2 * n;
        let k = 1 + (seed % 4) as u32;
        let formula = corpus_formula(n, m, k, seed);
        let truth = brute_force(&formula);
        let result = solve(&formula, &[], None).unwrap();
        assert_eq!(
            result.status == Status::Sat,
            truth > 0,
            "seed {seed} n {n} k {k}"
        );
        if let Some(witness) = result.witness {
            assert!(evaluate(&formula, &witness), "seed {seed}");
        }
    }
}

#[test]
fn exact_oracle_matches_brute_force() {
    for seed in 100..140u64 {
        let n = 3 + (seed % 9) as u32;
        let m = n + (seed % (2 * n as u64)) as u32;
        let k = (seed % 3) as u32;
        let formula = corpus_formula(n, m, k, seed);
        let truth = brute_force(&formula);
        assert_eq!(
            count_exact(&formula).unwrap(),
            BigUint::from(truth),
            "seed {seed}"
        );
    }
}

#[test]
fn bounded_count_is_exact_below_threshold_and_flags_saturation() {
    for seed in 200..230u64 {
        let n = 3 + (seed % 8) as u32;
        let formula = generate_random_3cnf(n, n, seed).unwrap();
        let truth = brute_force(&formula);
        let bounded = bounded_count(&formula, &[], 9, None).unwrap();
        if truth < 8 {
            assert!(!bounded.saturated, "seed {seed}");
            assert_eq!(bounded.count, truth, "seed {seed}");
        } else {
            assert!(bounded.saturated, "seed {seed}");
            assert_eq!(bounded.count, 8, "seed {seed}");
        }
        assert_eq!(counting_query(&formula, 9, None).unwrap(), truth.min(8));
    }
}

#[test]
fn hashed_prefixes_are_monotone_in_depth() {
    // Once a constraint prefix is unsatisfiable, every extension stays so.
    for seed in 0..25u64 {
        let n = 4 + (seed % 8) as u32;
        let formula = generate_random_3cnf(n, n, seed).unwrap();
        let mut stream = RngStream::from_seed(seed);
        let chain: Vec<XorConstraint> = (0..n + 4)
            .map(|_| hash_to_constraint(&draw_hash(n, &mut stream)))
            .collect();
        let mut seen_unsat = false;
        for depth in 0..=chain.len() {
            let status = solve_hashed(&formula, &chain[..depth], None)
                .unwrap()
                .status;
            if seen_unsat {
                assert_eq!(status, Status::Unsat, "seed {seed} depth {depth}");
            }
            seen_unsat |= status == Status::Unsat;
        }
    }
}

#[test]
fn hashed_solve_matches_brute_force_counts() {
    // The solver's verdict under a constraint prefix must match the number
    // of surviving models computed by direct evaluation.
    for seed in 50..70u64 {
        let n = 4 + (seed % 6) as u32;
        let formula = generate_random_3cnf(n, n + 2, seed).unwrap();
        let mut stream = RngStream::from_seed(seed * 31);
        let chain: Vec<XorConstraint> = (0..4)
            .map(|_| hash_to_constraint(&draw_hash(n, &mut stream)))
            .collect();
        for depth in 0..=4usize {
            let hashed =
                CnfFormula::new(n, formula.clauses().to_vec(), chain[..depth].to_vec()).unwrap();
            let survivors = brute_force(&hashed);
            let status = solve_hashed(&formula, &chain[..depth], None)
                .unwrap()
                .status;
            assert_eq!(
                status == Status::Sat,
                survivors > 0,
                "seed {seed} depth {depth}"
            );
        }
    }
}
