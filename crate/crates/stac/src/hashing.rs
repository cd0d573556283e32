//! Random parity hash functions over assignments.
//!
//! A hash maps an assignment to one bit: a fair-coin offset XORed with the
//! parity of a fair-coin subset of the variables. Conditioning a formula on
//! `hash(x) = true` keeps each assignment with probability one half,
//! independently enough across assignment pairs that repeated conditioning
//! cuts the model count roughly in half per level. A [`HashedChain`] holds a
//! formula together with an ordered list of such conditions; prefixes of the
//! chain give the progressively more constrained formulas the counters probe.

use std::sync::Arc;

use thiserror::Error;

use crate::formula::{Assignment, CnfFormula, XorConstraint};
use crate::rng::RngStream;
use crate::solver::{self, SolveResult, SolverError};

/// One random parity function: `offset XOR parity(coefficient subset)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XorHash {
    num_vars: u32,
    offset: bool,
    coeffs: Vec<u64>,
}

impl XorHash {
    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn offset(&self) -> bool {
        self.offset
    }

    /// Whether `var` participates in the parity.
    pub fn coefficient(&self, var: u32) -> bool {
        assert!((1..=self.num_vars).contains(&var), "variable out of range");
        let bit = var as usize - 1;
        self.coeffs[bit / 64] >> (bit % 64) & 1 == 1
    }

    /// Applies the hash to a total assignment.
    pub fn evaluate(&self, assignment: &Assignment) -> bool {
        assert_eq!(
            assignment.num_vars(),
            self.num_vars,
            "assignment width must match the hash"
        );
        let mut acc = self.offset;
        for v in 1..=self.num_vars {
            if self.coefficient(v) && assignment.value(v) {
                acc = !acc;
            }
        }
        acc
    }

    /// Variables with a set coefficient, ascending.
    pub fn support(&self) -> Vec<u32> {
        (1..=self.num_vars).filter(|&v| self.coefficient(v)).collect()
    }
}

/// Draws a hash for `num_vars` variables: every coefficient and the offset
/// are independent fair coins from `stream`.
pub fn draw_hash(num_vars: u32, stream: &mut RngStream) -> XorHash {
    let offset = stream.coin();
    let mut coeffs = vec![0u64; (num_vars as usize).div_ceil(64)];
    for bit in 0..num_vars as usize {
        if stream.coin() {
            coeffs[bit / 64] |= 1 << (bit % 64);
        }
    }
    XorHash {
        num_vars,
        offset,
        coeffs,
    }
}

/// The parity constraint equivalent to requiring `hash(x) = true`.
pub fn hash_to_constraint(hash: &XorHash) -> XorConstraint {
    XorConstraint::new(hash.support(), !hash.offset()).expect("support variables are nonzero")
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("hash over {hash_vars} variables cannot extend a chain over {chain_vars}")]
pub struct DimensionMismatch {
    pub chain_vars: u32,
    pub hash_vars: u32,
}

/// A base formula plus an ordered list of hash conditions. Extending a chain
/// shares the base formula, so prefixes and extensions are cheap and the
/// original chain stays usable.
#[derive(Clone, Debug)]
pub struct HashedChain {
    base: Arc<CnfFormula>,
    hashes: Vec<XorHash>,
    constraints: Vec<XorConstraint>,
}

impl HashedChain {
    pub fn new(base: Arc<CnfFormula>) -> HashedChain {
        HashedChain {
            base,
            hashes: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn base(&self) -> &CnfFormula {
        &self.base
    }

    pub fn depth(&self) -> u32 {
        self.hashes.len() as u32
    }

    pub fn hashes(&self) -> &[XorHash] {
        &self.hashes
    }

    /// Constraints of the first `depth` hashes.
    pub fn prefix(&self, depth: u32) -> &[XorConstraint] {
        &self.constraints[..depth as usize]
    }

    /// A new chain with `hash` appended.
    pub fn extend(&self, hash: XorHash) -> Result<HashedChain, DimensionMismatch> {
        if hash.num_vars() != self.base.num_vars() {
            return Err(DimensionMismatch {
                chain_vars: self.base.num_vars(),
                hash_vars: hash.num_vars(),
            });
        }
        let mut hashes = self.hashes.clone();
        let mut constraints = self.constraints.clone();
        constraints.push(hash_to_constraint(&hash));
        hashes.push(hash);
        Ok(HashedChain {
            base: Arc::clone(&self.base),
            hashes,
            constraints,
        })
    }

    /// Satisfiability of the base formula under the first `depth` hash
    /// conditions.
    pub fn solve_prefix(
        &self,
        depth: u32,
        budget: Option<u64>,
    ) -> Result<SolveResult, SolverError> {
        solver::solve_hashed(&self.base, self.prefix(depth), budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::generate_random_3cnf;
    use crate::solver::evaluate;

    #[test]
    fn draws_are_deterministic_per_path() {
        let mut a = RngStream::from_seed(3).derive(1);
        let mut b = RngStream::from_seed(3).derive(1);
        assert_eq!(draw_hash(40, &mut a), draw_hash(40, &mut b));
    }

    #[test]
    fn constraint_agrees_with_direct_evaluation() {
        // For every assignment of a small space: hash(x) = true exactly when
        // the derived parity constraint holds.
        let n = 4;
        let mut stream = RngStream::from_seed(11);
        for _ in 0..200 {
            let hash = draw_hash(n, &mut stream);
            let constraint = hash_to_constraint(&hash);
            let formula =
                CnfFormula::new(n, vec![], vec![constraint]).expect("constraint in range");
            for idx in 0..1u64 << n {
                let a = Assignment::from_index(n, idx);
                assert_eq!(hash.evaluate(&a), evaluate(&formula, &a));
            }
        }
    }

    #[test]
    fn single_point_passes_half_the_time() {
        let n = 6;
        let point = Assignment::from_index(n, 0b101_101);
        let mut stream = RngStream::from_seed(17);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| draw_hash(n, &mut stream).evaluate(&point))
            .count();
        // Mean 10000, sd ~70.7; allow 4 sigma.
        assert!((9_717..=10_283).contains(&hits), "hits = {hits}");
    }

    #[test]
    fn distinct_points_pass_together_a_quarter_of_the_time() {
        let n = 6;
        let alpha = Assignment::from_index(n, 0b000_111);
        let beta = Assignment::from_index(n, 0b110_001);
        let mut stream = RngStream::from_seed(23);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| {
                let h = draw_hash(n, &mut stream);
                h.evaluate(&alpha) && h.evaluate(&beta)
            })
            .count();
        // Mean 5000, sd ~61.2; allow 4 sigma.
        assert!((4_755..=5_245).contains(&hits), "hits = {hits}");
    }

    #[test]
    fn chain_prefixes_share_the_base() {
        let base = Arc::new(generate_random_3cnf(8, 12, 9).unwrap());
        let mut stream = RngStream::from_seed(31);
        let mut chain = HashedChain::new(Arc::clone(&base));
        for _ in 0..5 {
            chain = chain.extend(draw_hash(8, &mut stream)).unwrap();
        }
        assert_eq!(chain.depth(), 5);
        assert_eq!(chain.prefix(0).len(), 0);
        assert_eq!(chain.prefix(3), &chain.constraints[..3]);
        for (hash, constraint) in chain.hashes().iter().zip(chain.prefix(5)) {
            assert_eq!(&hash_to_constraint(hash), constraint);
        }
    }

    #[test]
    fn extending_with_wrong_width_fails() {
        let base = Arc::new(CnfFormula::empty(8));
        let chain = HashedChain::new(base);
        let mut stream = RngStream::from_seed(1);
        let hash = draw_hash(5, &mut stream);
        assert_eq!(
            chain.extend(hash).unwrap_err(),
            DimensionMismatch {
                chain_vars: 8,
                hash_vars: 5
            }
        );
    }
}
