//! Randomized structural invariants: DIMACS round-trips, histogram
//! monotonicity and depth selection, interval arithmetic against direct
//! transcriptions, the count/proportion inversion, run-count monotonicity,
//! parity normalization, and the depth-window scans.

use num::BigUint;
use proptest::prelude::*;
use stac::counters::DepthHistogram;
use stac::formula::{emit_dimacs, parse_dimacs, Assignment, Clause, CnfFormula, Lit, XorConstraint};
use stac::oracle::count_exact;
use stac::solver::{evaluate, solve, Status};
use stac::stats::{
    compute_t, depth_window, estimate_count, interval_normal, interval_wilson, q_of, q_of_u64,
    qd_window, AccuracyParams,
};

/// Random formulas over at most twelve variables, with clauses of one to
/// four literals and up to four parity constraints of up to five variables.
fn formula_strategy() -> impl Strategy<Value = CnfFormula> {
    (1u32..=12).prop_flat_map(|n| {
        let lit = (1u32..=n, any::<bool>()).prop_map(|(var, neg)| Lit::new(var, neg));
        let clause =
            prop::collection::vec(lit, 1..=4).prop_map(|lits| Clause::new(lits).unwrap());
        let xor = (prop::collection::vec(1u32..=n, 0..=5), any::<bool>())
            .prop_map(|(vars, rhs)| XorConstraint::new(vars, rhs).unwrap());
        (
            Just(n),
            prop::collection::vec(clause, 0..=12),
            prop::collection::vec(xor, 0..=4),
        )
            .prop_map(|(n, clauses, xors)| CnfFormula::new(n, clauses, xors).unwrap())
    })
}

/// Model count by direct enumeration of all assignments.
fn brute_force_count(formula: &CnfFormula) -> u64 {
    let n = formula.num_vars();
    (0..1u64 << n)
        .filter(|&index| evaluate(formula, &Assignment::from_index(n, index)))
        .count() as u64
}

proptest! {
    #[test]
    fn dimacs_text_round_trips(formula in formula_strategy()) {
        let text = emit_dimacs(&formula);
        let parsed = parse_dimacs(&text).unwrap();
        // The empty always-true parity constraint has no DIMACS spelling,
        // so it is the one part a round trip may drop.
        let kept: Vec<XorConstraint> = formula
            .xors()
            .iter()
            .filter(|x| !x.is_tautology())
            .cloned()
            .collect();
        let expected =
            CnfFormula::new(formula.num_vars(), formula.clauses().to_vec(), kept).unwrap();
        prop_assert_eq!(parsed, expected);
    }

    #[test]
    fn histogram_counts_never_increase_with_depth(
        depths in prop::collection::vec(0u32..=20, 1..=200),
    ) {
        let mut histogram = DepthHistogram::default();
        for &d in &depths {
            histogram.record(d);
        }
        prop_assert_eq!(histogram.runs(), depths.len() as u64);
        for d in 0..=histogram.max_depth() {
            prop_assert!(histogram.count_above(d) >= histogram.count_above(d + 1));
        }
        prop_assert_eq!(histogram.count_above(histogram.max_depth()), 0);
    }

    #[test]
    fn selected_depth_is_the_shallowest_closest_to_half(
        depths in prop::collection::vec(0u32..=20, 1..=200),
    ) {
        let mut histogram = DepthHistogram::default();
        for &d in &depths {
            histogram.record(d);
        }
        let runs = depths.len() as u64;
        let distance = |d: u32| (2 * histogram.count_above(d)).abs_diff(runs);
        let chosen = histogram.select_depth();
        for d in 0..=histogram.max_depth() {
            prop_assert!(distance(chosen) <= distance(d));
            if distance(d) == distance(chosen) {
                prop_assert!(chosen <= d);
            }
        }
    }

    #[test]
    fn intervals_match_direct_transcriptions(
        q in 0.001f64..0.999,
        runs in 1u64..5000,
        which in 0usize..3,
    ) {
        let z = [1.2815515655446005, 1.959963984540054, 2.575829303548901][which];
        let t = runs as f64;

        let normal = interval_normal(q, runs, z);
        let half = z * (q * (1.0 - q) / t).sqrt();
        prop_assert!((normal.lower - (q - half).max(0.0)).abs() < 1e-9);
        prop_assert!((normal.upper - (q + half).min(1.0)).abs() < 1e-9);

        let wilson = interval_wilson(q, runs, z);
        let z2 = z * z;
        let denom = 1.0 + z2 / t;
        let center = (q + z2 / (2.0 * t)) / denom;
        let spread = z * (q * (1.0 - q) / t + z2 / (4.0 * t * t)).sqrt() / denom;
        prop_assert!((wilson.lower - (center - spread).max(0.0)).abs() < 1e-9);
        prop_assert!((wilson.upper - (center + spread).min(1.0)).abs() < 1e-9);
        prop_assert!(wilson.lower <= wilson.upper);
        prop_assert!(normal.lower <= normal.upper);
    }

    #[test]
    fn count_estimate_inverts_the_avoidance_proportion(
        depth in 1u32..=30,
        count in 1u64..=10_000,
    ) {
        let q = q_of_u64(depth, count);
        // Deep counts at shallow depths underflow to zero, where the
        // inversion is undefined by contract.
        prop_assume!(q > 0.0 && q < 1.0);
        let recovered = estimate_count(depth, q).unwrap();
        prop_assert!(
            (recovered - count as f64).abs() <= 1e-6 * count as f64,
            "depth {} count {} recovered {}",
            depth,
            count,
            recovered
        );
    }

    #[test]
    fn tighter_targets_never_need_fewer_runs(
        epsilon in 0.05f64..2.0,
        epsilon_slack in 0.0f64..1.0,
        delta in 0.01f64..0.5,
        delta_slack in 0.0f64..0.4,
    ) {
        let tight = compute_t(&AccuracyParams::new(epsilon, delta).unwrap());
        let looser_epsilon =
            compute_t(&AccuracyParams::new(epsilon + epsilon_slack, delta).unwrap());
        prop_assert!(tight >= looser_epsilon);
        let looser_delta = compute_t(
            &AccuracyParams::new(epsilon, (delta + delta_slack).min(0.9)).unwrap(),
        );
        prop_assert!(tight >= looser_delta);
    }

    #[test]
    fn parity_normalization_preserves_semantics(
        vars in prop::collection::vec(1u32..=16, 0..=12),
        rhs in any::<bool>(),
        bits in any::<u16>(),
    ) {
        let xor = XorConstraint::new(vars.clone(), rhs).unwrap();
        prop_assert_eq!(xor.rhs(), rhs);
        // Normalization keeps at most one copy of each variable.
        for (i, &v) in xor.vars().iter().enumerate() {
            prop_assert!(!xor.vars()[..i].contains(&v));
        }
        let value = |v: u32| bits >> (v - 1) & 1 == 1;
        let raw_parity = vars.iter().fold(false, |p, &v| p ^ value(v));
        let kept_parity = xor.vars().iter().fold(false, |p, &v| p ^ value(v));
        prop_assert_eq!(raw_parity, kept_parity);
    }

    #[test]
    fn exact_count_matches_enumeration(formula in formula_strategy()) {
        let expected = brute_force_count(&formula);
        let counted = count_exact(&formula).unwrap();
        prop_assert_eq!(counted, BigUint::from(expected));
        let result = solve(&formula, &[], None).unwrap();
        if expected > 0 {
            prop_assert_eq!(result.status, Status::Sat);
            let witness = result.witness.unwrap();
            prop_assert!(evaluate(&formula, &witness));
        } else {
            prop_assert_eq!(result.status, Status::Unsat);
            prop_assert!(result.witness.is_none());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn proportion_window_exists_for_every_count(
        low in any::<u64>(),
        high in 0u64..(1u64 << 56),
    ) {
        let mut count = (BigUint::from(high) << 64) | BigUint::from(low);
        if count == BigUint::ZERO {
            count = BigUint::from(1u32);
        }
        let (depth, q) = qd_window(&count).expect("window must exist");
        prop_assert!(depth >= 1);
        prop_assert!((0.4..=0.65).contains(&q));
        prop_assert_eq!(q, q_of(depth, &count));
        if depth > 1 {
            prop_assert!(q_of(depth - 1, &count) < 0.4);
        }
    }

    #[test]
    fn depth_window_brackets_every_count(
        low in any::<u64>(),
        high in 0u64..(1u64 << 56),
    ) {
        let mut count = (BigUint::from(high) << 64) | BigUint::from(low);
        if count == BigUint::ZERO {
            count = BigUint::from(1u32);
        }
        let depth = depth_window(&count).expect("window must exist");
        prop_assert!(q_of(depth, &count) < 0.05);
        prop_assert!(q_of(depth + 7, &count) > 0.95);
        if depth > 0 {
            prop_assert!(q_of(depth + 6, &count) <= 0.95);
        }
    }
}

#[test]
fn contradictory_parity_line_round_trips() {
    let xor = XorConstraint::new(Vec::<u32>::new(), true).unwrap();
    assert!(xor.is_contradiction());
    let formula = CnfFormula::new(3, vec![], vec![xor]).unwrap();
    let text = emit_dimacs(&formula);
    assert!(text.contains("x 0"));
    let parsed = parse_dimacs(&text).unwrap();
    assert_eq!(parsed, formula);
    assert_eq!(count_exact(&parsed).unwrap(), BigUint::ZERO);
}
