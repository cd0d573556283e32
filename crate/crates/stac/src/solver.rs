//! A small complete SAT solver for CNF formulas with native parity
//! constraints.
//!
//! The search is iterative DPLL: unit propagation over ordinary clauses uses
//! two watched literals, and at every propagation fixpoint the parity rows
//! are reduced by Gaussian elimination over GF(2) under the current partial
//! assignment. Parity constraints are never expanded into clauses, so a
//! formula with many XOR rows stays compact and elimination exposes every
//! literal the rows force. Branching is chronological with no clause
//! learning, which keeps the solver deterministic and byte-for-byte
//! replayable: identical inputs produce identical results and statistics.

use thiserror::Error;

use crate::formula::{Assignment, Clause, CnfFormula, FormulaError, Lit, XorConstraint};

/// Verdict of a satisfiability query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
}

/// Outcome of a solve call. `witness` is populated exactly when `status`
/// is `Sat`; the counters cover this call only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub status: Status,
    pub witness: Option<Assignment>,
    pub decisions: u64,
    pub propagations: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("step budget of {budget} exhausted")]
    BudgetExceeded { budget: u64 },
    #[error("assumption on variable {var} outside 1..={num_vars}")]
    AssumptionOutOfRange { var: u32, num_vars: u32 },
}

fn lit_value(values: &[i8], lit: Lit) -> i8 {
    let v = values[lit.var() as usize - 1];
    if lit.is_negative() {
        -v
    } else {
        v
    }
}

/// Parity rows as bit matrices over GF(2), one bit per variable.
struct ParityBank {
    words: usize,
    bits: Vec<u64>,
    rhs: Vec<bool>,
    support: Vec<u64>,
}

/// Reusable buffers for the elimination passes.
#[derive(Default)]
struct GaussScratch {
    assigned: Vec<u64>,
    value: Vec<u64>,
    tmp: Vec<u64>,
    rows: Vec<u64>,
    rhs: Vec<bool>,
    pivots: Vec<usize>,
}

enum ParityOutcome {
    Conflict,
    /// Variables forced by the rows, possibly none. Forced variables are
    /// unassigned in the probed state by construction.
    Units(Vec<(u32, bool)>),
}

impl ParityBank {
    fn new(num_vars: u32) -> ParityBank {
        let words = (num_vars as usize).div_ceil(64);
        ParityBank {
            words,
            bits: Vec::new(),
            rhs: Vec::new(),
            support: vec![0; words],
        }
    }

    fn rows(&self) -> usize {
        self.rhs.len()
    }

    /// Adds a row. Returns false when the row alone is unsatisfiable.
    /// Tautologous rows are dropped.
    fn add(&mut self, vars: &[u32], rhs: bool) -> bool {
        if vars.is_empty() {
            return !rhs;
        }
        let base = self.bits.len();
        self.bits.resize(base + self.words, 0);
        for &v in vars {
            let bit = v as usize - 1;
            self.bits[base + bit / 64] |= 1 << (bit % 64);
            self.support[bit / 64] |= 1 << (bit % 64);
        }
        self.rhs.push(rhs);
        true
    }

    fn supports_any(&self, lits: &[Lit]) -> bool {
        lits.iter().any(|l| {
            let bit = l.var() as usize - 1;
            self.support[bit / 64] >> (bit % 64) & 1 == 1
        })
    }

    fn build_masks(&self, values: &[i8], scratch: &mut GaussScratch) {
        scratch.assigned.clear();
        scratch.assigned.resize(self.words, 0);
        scratch.value.clear();
        scratch.value.resize(self.words, 0);
        for (i, &v) in values.iter().enumerate() {
            if v != 0 {
                scratch.assigned[i / 64] |= 1 << (i % 64);
                if v > 0 {
                    scratch.value[i / 64] |= 1 << (i % 64);
                }
            }
        }
    }

    /// Reduces all rows under `values` to reduced row echelon form held in
    /// `scratch`. Returns false when the residual system is inconsistent.
    fn reduce(&self, values: &[i8], scratch: &mut GaussScratch) -> bool {
        self.build_masks(values, scratch);
        scratch.rows.clear();
        scratch.rhs.clear();
        scratch.pivots.clear();
        let w = self.words;
        for r in 0..self.rows() {
            let row = &self.bits[r * w..(r + 1) * w];
            scratch.tmp.clear();
            scratch.tmp.extend(
                row.iter()
                    .zip(&scratch.assigned)
                    .map(|(&b, &a)| b & !a),
            );
            let mut parity = 0u32;
            for (i, &b) in row.iter().enumerate() {
                parity ^= (b & scratch.value[i]).count_ones() & 1;
            }
            let mut rhs = self.rhs[r] ^ (parity == 1);
            // Reduce against the pivots found so far.
            for k in 0..scratch.pivots.len() {
                let p = scratch.pivots[k];
                if scratch.tmp[p / 64] >> (p % 64) & 1 == 1 {
                    for i in 0..w {
                        scratch.tmp[i] ^= scratch.rows[k * w + i];
                    }
                    rhs ^= scratch.rhs[k];
                }
            }
            let Some(pivot) = first_bit(&scratch.tmp) else {
                if rhs {
                    return false;
                }
                continue;
            };
            // Clear the new pivot from every earlier row for full RREF.
            for k in 0..scratch.pivots.len() {
                if scratch.rows[k * w + pivot / 64] >> (pivot % 64) & 1 == 1 {
                    for i in 0..w {
                        scratch.rows[k * w + i] ^= scratch.tmp[i];
                    }
                    let flip = rhs;
                    scratch.rhs[k] ^= flip;
                }
            }
            scratch.rows.extend_from_slice(&scratch.tmp);
            scratch.rhs.push(rhs);
            scratch.pivots.push(pivot);
        }
        true
    }

    /// Conflict check plus forced variables at the current fixpoint.
    fn analyze(&self, values: &[i8], scratch: &mut GaussScratch) -> ParityOutcome {
        if !self.reduce(values, scratch) {
            return ParityOutcome::Conflict;
        }
        let w = self.words;
        let mut units = Vec::new();
        for k in 0..scratch.pivots.len() {
            let row = &scratch.rows[k * w..(k + 1) * w];
            let ones: u32 = row.iter().map(|x| x.count_ones()).sum();
            if ones == 1 {
                units.push((scratch.pivots[k] as u32 + 1, scratch.rhs[k]));
            }
        }
        ParityOutcome::Units(units)
    }

    /// Extends a consistent fixpoint to a total assignment: free variables
    /// go false, then each pivot takes its row's right-hand side (its row
    /// mentions only free variables besides the pivot, all now false).
    /// Returns false when the residual system is inconsistent.
    fn complete(&self, values: &mut [i8], scratch: &mut GaussScratch) -> bool {
        if !self.reduce(values, scratch) {
            return false;
        }
        let pivot_values: Vec<(usize, bool)> = scratch
            .pivots
            .iter()
            .zip(&scratch.rhs)
            .map(|(&p, &r)| (p, r))
            .collect();
        for v in values.iter_mut() {
            if *v == 0 {
                *v = -1;
            }
        }
        for (p, r) in pivot_values {
            values[p] = if r { 1 } else { -1 };
        }
        true
    }
}

fn first_bit(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

struct Frame {
    trail_len: usize,
    lit: Lit,
    flipped: bool,
}

/// An incremental solver instance. Clauses may be added between solve calls,
/// which is how model enumeration blocks previously found witnesses.
pub struct Solver {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<u32>>,
    root_units: Vec<Lit>,
    parity: ParityBank,
    unsat_forever: bool,
    order: Vec<u32>,
    values: Vec<i8>,
    trail: Vec<Lit>,
    frames: Vec<Frame>,
    qhead: usize,
    xor_mark: Option<usize>,
    scratch: GaussScratch,
    decisions: u64,
    propagations: u64,
}

enum Propagation {
    Fixpoint,
    Conflict,
}

impl Solver {
    /// Builds a solver over `formula` plus `extra_xors`, which must mention
    /// only variables of the formula.
    pub fn new(formula: &CnfFormula, extra_xors: &[XorConstraint]) -> Solver {
        let num_vars = formula.num_vars();
        let mut solver = Solver {
            num_vars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars as usize],
            root_units: Vec::new(),
            parity: ParityBank::new(num_vars),
            unsat_forever: false,
            order: Vec::new(),
            values: vec![0; num_vars as usize],
            trail: Vec::new(),
            frames: Vec::new(),
            qhead: 0,
            xor_mark: None,
            scratch: GaussScratch::default(),
            decisions: 0,
            propagations: 0,
        };
        let mut occurrence = vec![0u64; num_vars as usize];
        for clause in formula.clauses() {
            for lit in clause.literals() {
                occurrence[lit.var() as usize - 1] += 1;
            }
            solver.attach(clause);
        }
        for xor in formula.xors().iter().chain(extra_xors) {
            for &v in xor.vars() {
                assert!(v <= num_vars, "parity row variable out of range");
                occurrence[v as usize - 1] += 1;
            }
            if !solver.parity.add(xor.vars(), xor.rhs()) {
                solver.unsat_forever = true;
            }
        }
        // Branch order: most constrained variable first, index breaking ties.
        let mut order: Vec<u32> = (1..=num_vars).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(occurrence[v as usize - 1]), v));
        solver.order = order;
        solver
    }

    fn attach(&mut self, clause: &Clause) {
        if clause.is_tautology() {
            return;
        }
        let lits: Vec<Lit> = clause.literals().to_vec();
        if lits.len() == 1 {
            self.root_units.push(lits[0]);
            return;
        }
        let cid = self.clauses.len() as u32;
        self.watches[lits[0].index()].push(cid);
        self.watches[lits[1].index()].push(cid);
        self.clauses.push(lits);
    }

    /// Adds a clause for all later solve calls. Tautologies are ignored.
    pub fn add_clause(&mut self, clause: &Clause) -> Result<(), FormulaError> {
        for lit in clause.literals() {
            if lit.var() > self.num_vars {
                return Err(FormulaError::VarOutOfRange {
                    var: lit.var(),
                    num_vars: self.num_vars,
                });
            }
        }
        self.attach(clause);
        Ok(())
    }

    fn check_budget(&self, budget: Option<u64>) -> Result<(), SolverError> {
        if let Some(b) = budget {
            if self.decisions + self.propagations > b {
                return Err(SolverError::BudgetExceeded { budget: b });
            }
        }
        Ok(())
    }

    fn enqueue(&mut self, lit: Lit) {
        debug_assert_eq!(lit_value(&self.values, lit), 0);
        self.values[lit.var() as usize - 1] = if lit.is_negative() { -1 } else { 1 };
        self.trail.push(lit);
    }

    fn propagate_clauses(&mut self, budget: Option<u64>) -> Result<Propagation, SolverError> {
        while self.qhead < self.trail.len() {
            let lit = self.trail[self.qhead];
            self.qhead += 1;
            self.propagations += 1;
            self.check_budget(budget)?;
            let false_lit = !lit;
            let fidx = false_lit.index();
            let ws = std::mem::take(&mut self.watches[fidx]);
            let mut kept = Vec::with_capacity(ws.len());
            let mut conflict = false;
            for (pos, &cid) in ws.iter().enumerate() {
                let clause = &mut self.clauses[cid as usize];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                debug_assert_eq!(clause[1], false_lit);
                let first = clause[0];
                if lit_value(&self.values, first) == 1 {
                    kept.push(cid);
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    if lit_value(&self.values, clause[k]) != -1 {
                        clause.swap(1, k);
                        let new_watch = clause[1].index();
                        self.watches[new_watch].push(cid);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                kept.push(cid);
                match lit_value(&self.values, first) {
                    -1 => {
                        kept.extend_from_slice(&ws[pos + 1..]);
                        conflict = true;
                        break;
                    }
                    0 => self.enqueue(first),
                    _ => unreachable!("satisfied clauses were skipped"),
                }
            }
            self.watches[fidx] = kept;
            if conflict {
                return Ok(Propagation::Conflict);
            }
        }
        Ok(Propagation::Fixpoint)
    }

    /// Clause propagation and parity elimination to a joint fixpoint.
    fn propagate(&mut self, budget: Option<u64>) -> Result<Propagation, SolverError> {
        loop {
            if let Propagation::Conflict = self.propagate_clauses(budget)? {
                return Ok(Propagation::Conflict);
            }
            if self.parity.rows() == 0 {
                return Ok(Propagation::Fixpoint);
            }
            // Skip elimination when no variable a row mentions has changed
            // since the last pass at a prefix of this trail.
            if let Some(mark) = self.xor_mark {
                debug_assert!(mark <= self.trail.len());
                if !self.parity.supports_any(&self.trail[mark..]) {
                    self.xor_mark = Some(self.trail.len());
                    return Ok(Propagation::Fixpoint);
                }
            }
            let outcome = self.parity.analyze(&self.values, &mut self.scratch);
            self.xor_mark = Some(self.trail.len());
            match outcome {
                ParityOutcome::Conflict => return Ok(Propagation::Conflict),
                ParityOutcome::Units(units) => {
                    if units.is_empty() {
                        return Ok(Propagation::Fixpoint);
                    }
                    for (var, value) in units {
                        self.propagations += 1;
                        self.check_budget(budget)?;
                        self.enqueue(Lit::new(var, !value));
                    }
                }
            }
        }
    }

    fn all_clauses_satisfied(&self) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| lit_value(&self.values, l) == 1))
    }

    fn backtrack(&mut self) -> bool {
        while let Some(frame) = self.frames.pop() {
            for lit in self.trail.drain(frame.trail_len..) {
                self.values[lit.var() as usize - 1] = 0;
            }
            self.qhead = frame.trail_len;
            self.xor_mark = None;
            if !frame.flipped {
                let lit = frame.lit;
                self.frames.push(Frame {
                    trail_len: frame.trail_len,
                    lit,
                    flipped: true,
                });
                self.enqueue(!lit);
                return true;
            }
        }
        false
    }

    fn pick_branch(&self) -> Option<Lit> {
        self.order
            .iter()
            .find(|&&v| self.values[v as usize - 1] == 0)
            .map(|&v| Lit::new(v, false))
    }

    fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0);
        self.trail.clear();
        self.frames.clear();
        self.qhead = 0;
        self.xor_mark = None;
        self.decisions = 0;
        self.propagations = 0;
    }

    fn finish(&self, status: Status) -> SolveResult {
        let witness = match status {
            Status::Sat => {
                debug_assert!(self.values.iter().all(|&v| v != 0));
                Some(Assignment::new(self.values.iter().map(|&v| v == 1).collect()))
            }
            Status::Unsat => None,
        };
        SolveResult {
            status,
            witness,
            decisions: self.decisions,
            propagations: self.propagations,
        }
    }

    /// Decides satisfiability under `assumptions`, which act as forced
    /// root-level decisions. `budget` caps decisions plus propagations;
    /// exhausting it aborts the call with an error.
    pub fn solve(
        &mut self,
        assumptions: &[Lit],
        budget: Option<u64>,
    ) -> Result<SolveResult, SolverError> {
        self.reset();
        if self.unsat_forever {
            return Ok(self.finish(Status::Unsat));
        }
        for &lit in assumptions {
            if lit.var() > self.num_vars {
                return Err(SolverError::AssumptionOutOfRange {
                    var: lit.var(),
                    num_vars: self.num_vars,
                });
            }
        }
        for &lit in &self.root_units {
            match lit_value(&self.values, lit) {
                -1 => return Ok(self.finish(Status::Unsat)),
                0 => {
                    self.values[lit.var() as usize - 1] = if lit.is_negative() { -1 } else { 1 };
                    self.trail.push(lit);
                }
                _ => {}
            }
        }
        for &lit in assumptions {
            match lit_value(&self.values, lit) {
                -1 => return Ok(self.finish(Status::Unsat)),
                0 => self.enqueue(lit),
                _ => {}
            }
            if let Propagation::Conflict = self.propagate(budget)? {
                return Ok(self.finish(Status::Unsat));
            }
        }
        loop {
            match self.propagate(budget)? {
                Propagation::Conflict => {
                    if !self.backtrack() {
                        return Ok(self.finish(Status::Unsat));
                    }
                }
                Propagation::Fixpoint => {
                    if self.all_clauses_satisfied() {
                        if self.parity.complete(&mut self.values, &mut self.scratch) {
                            return Ok(self.finish(Status::Sat));
                        }
                        // The residual rows were consistent at the fixpoint,
                        // so completion can only fail on a stale skip.
                        if !self.backtrack() {
                            return Ok(self.finish(Status::Unsat));
                        }
                        continue;
                    }
                    let lit = self
                        .pick_branch()
                        .expect("unsatisfied clause implies an unassigned variable");
                    self.decisions += 1;
                    self.check_budget(budget)?;
                    self.frames.push(Frame {
                        trail_len: self.trail.len(),
                        lit,
                        flipped: false,
                    });
                    self.enqueue(lit);
                }
            }
        }
    }
}

/// One-shot satisfiability query.
pub fn solve(
    formula: &CnfFormula,
    assumptions: &[Lit],
    budget: Option<u64>,
) -> Result<SolveResult, SolverError> {
    Solver::new(formula, &[]).solve(assumptions, budget)
}

/// One-shot satisfiability query for `formula` conjoined with parity rows.
pub fn solve_hashed(
    formula: &CnfFormula,
    extra_xors: &[XorConstraint],
    budget: Option<u64>,
) -> Result<SolveResult, SolverError> {
    Solver::new(formula, extra_xors).solve(&[], budget)
}

/// Checks a total assignment against every clause and parity constraint.
pub fn evaluate(formula: &CnfFormula, assignment: &Assignment) -> bool {
    assert_eq!(
        formula.num_vars(),
        assignment.num_vars(),
        "assignment must cover every variable"
    );
    let clauses_ok = formula.clauses().iter().all(|c| {
        c.literals()
            .iter()
            .any(|l| assignment.value(l.var()) != l.is_negative())
    });
    let xors_ok = formula.xors().iter().all(|x| {
        let parity = x.vars().iter().fold(false, |p, &v| p ^ assignment.value(v));
        parity == x.rhs()
    });
    clauses_ok && xors_ok
}
