//! Propositional formulas in CNF with optional parity (XOR) constraints,
//! plus a strict DIMACS reader/writer and a random 3-CNF generator.
//!
//! The text format is standard DIMACS CNF extended with parity lines: a line
//! beginning with `x` holds literals whose XOR is asserted true, e.g.
//! `x1 -2 0` asserts `v1 XOR NOT v2`. Parity lines count toward the clause
//! total declared in the header.

use std::fmt;

use thiserror::Error;

use crate::rng::RngStream;

/// Structural problems with formula components.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("clause contains no literals")]
    EmptyClause,
    #[error("variable index 0 is reserved; variables start at 1")]
    ZeroVariable,
    #[error("variable {var} exceeds declared count {num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("formula declares zero variables")]
    NoVariables,
    #[error("random 3-CNF generation needs at least 3 variables, got {n}")]
    TooFewVariables { n: u32 },
}

/// A propositional literal: a variable index (from 1) with a sign.
///
/// Stored as the nonzero DIMACS integer, negative for negated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    /// Literal on `var` (must be nonzero), negated when `negated` is true.
    pub fn new(var: u32, negated: bool) -> Lit {
        assert!(var != 0, "variables start at 1");
        assert!(var <= i32::MAX as u32, "variable index too large");
        Lit(if negated { -(var as i32) } else { var as i32 })
    }

    /// Literal from a DIMACS integer; rejects 0.
    pub fn from_dimacs(code: i32) -> Result<Lit, FormulaError> {
        if code == 0 {
            Err(FormulaError::ZeroVariable)
        } else {
            Ok(Lit(code))
        }
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    /// Dense index for watch lists: positive literals at even slots.
    pub(crate) fn index(self) -> usize {
        2 * (self.var() as usize - 1) + usize::from(self.is_negative())
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A disjunction of literals. Never empty; duplicate literals are dropped at
/// construction (first occurrence kept). A clause may contain a variable in
/// both signs, which makes it tautologous but still well-formed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    literals: Vec<Lit>,
}

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = Lit>) -> Result<Clause, FormulaError> {
        let mut out: Vec<Lit> = Vec::new();
        for lit in literals {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        if out.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        Ok(Clause { literals: out })
    }

    pub fn literals(&self) -> &[Lit] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when some variable occurs in both signs.
    pub fn is_tautology(&self) -> bool {
        self.literals.iter().any(|&l| self.literals.contains(&!l))
    }
}

/// A parity constraint: the XOR of `vars` must equal `rhs`.
///
/// Repeated variables cancel in pairs at construction. The empty constraint
/// with `rhs = false` is a tautology; with `rhs = true` it is unsatisfiable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XorConstraint {
    vars: Vec<u32>,
    rhs: bool,
}

impl XorConstraint {
    pub fn new(vars: impl IntoIterator<Item = u32>, rhs: bool) -> Result<XorConstraint, FormulaError> {
        let mut out: Vec<u32> = Vec::new();
        for v in vars {
            if v == 0 {
                return Err(FormulaError::ZeroVariable);
            }
            if let Some(pos) = out.iter().position(|&u| u == v) {
                out.remove(pos);
            } else {
                out.push(v);
            }
        }
        Ok(XorConstraint { vars: out, rhs })
    }

    pub fn vars(&self) -> &[u32] {
        &self.vars
    }

    pub fn rhs(&self) -> bool {
        self.rhs
    }

    pub fn is_tautology(&self) -> bool {
        self.vars.is_empty() && !self.rhs
    }

    pub fn is_contradiction(&self) -> bool {
        self.vars.is_empty() && self.rhs
    }
}

/// A CNF formula over variables `1..=num_vars`, with ordinary clauses and
/// parity constraints kept separate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    xors: Vec<XorConstraint>,
}

impl CnfFormula {
    pub fn new(
        num_vars: u32,
        clauses: Vec<Clause>,
        xors: Vec<XorConstraint>,
    ) -> Result<CnfFormula, FormulaError> {
        if num_vars == 0 {
            return Err(FormulaError::NoVariables);
        }
        for clause in &clauses {
            for lit in clause.literals() {
                if lit.var() > num_vars {
                    return Err(FormulaError::VarOutOfRange {
                        var: lit.var(),
                        num_vars,
                    });
                }
            }
        }
        for xor in &xors {
            for &v in xor.vars() {
                if v > num_vars {
                    return Err(FormulaError::VarOutOfRange { var: v, num_vars });
                }
            }
        }
        Ok(CnfFormula {
            num_vars,
            clauses,
            xors,
        })
    }

    /// Formula with no constraints; every assignment is a model.
    pub fn empty(num_vars: u32) -> CnfFormula {
        CnfFormula::new(num_vars, Vec::new(), Vec::new()).expect("no constraints to validate")
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn xors(&self) -> &[XorConstraint] {
        &self.xors
    }
}

/// A total assignment to variables `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    /// Values indexed by variable: `values[0]` is variable 1.
    pub fn new(values: Vec<bool>) -> Assignment {
        Assignment { values }
    }

    /// Assignment where variable `v` takes bit `v - 1` of `index`.
    /// Usable for exhaustive sweeps over at most 64 variables.
    pub fn from_index(num_vars: u32, index: u64) -> Assignment {
        assert!(num_vars <= 64, "index encoding holds at most 64 variables");
        let values = (0..num_vars).map(|b| index >> b & 1 == 1).collect();
        Assignment { values }
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn value(&self, var: u32) -> bool {
        self.values[var as usize - 1]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }
}

/// Where and why reading a DIMACS document failed. Lines are 1-based.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("missing `p cnf <vars> <clauses>` header")]
    MissingHeader,
    #[error("malformed header")]
    MalformedHeader,
    #[error("header declares zero variables")]
    ZeroVariables,
    #[error("unreadable token `{0}`")]
    InvalidToken(String),
    #[error("variable {var} exceeds declared count {num_vars}")]
    VarOutOfRange { var: u64, num_vars: u32 },
    #[error("clause lacks terminating 0")]
    UnterminatedClause,
    #[error("tokens after clause terminator")]
    TrailingTokens,
    #[error("clause contains no literals")]
    EmptyClause,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: u64, found: u64 },
}

fn parse_error(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// Reads one line of literals terminated by a single `0`.
fn parse_literal_line(body: &str, line: usize, num_vars: u32) -> Result<Vec<i32>, ParseError> {
    let mut lits = Vec::new();
    let mut terminated = false;
    for token in body.split_whitespace() {
        if terminated {
            return Err(parse_error(line, ParseErrorKind::TrailingTokens));
        }
        let value: i64 = token
            .parse()
            .map_err(|_| parse_error(line, ParseErrorKind::InvalidToken(token.into())))?;
        if value == 0 {
            terminated = true;
            continue;
        }
        if value.unsigned_abs() > num_vars as u64 {
            return Err(parse_error(
                line,
                ParseErrorKind::VarOutOfRange {
                    var: value.unsigned_abs(),
                    num_vars,
                },
            ));
        }
        lits.push(value as i32);
    }
    if !terminated {
        return Err(parse_error(line, ParseErrorKind::UnterminatedClause));
    }
    Ok(lits)
}

/// Parses a DIMACS CNF document with optional parity lines.
///
/// The reader is strict: one clause per line, each terminated by `0`;
/// comment lines start with `c`; blank lines are ignored; the header's
/// clause count must match the number of clause and parity lines exactly.
pub fn parse_dimacs(input: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(u32, u64)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut xors: Vec<XorConstraint> = Vec::new();
    let mut found: u64 = 0;
    let mut last_line = 0;

    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('c') {
            continue;
        }
        let Some((num_vars, declared)) = header else {
            let tokens: Vec<&str> = text.split_whitespace().collect();
            if tokens.len() != 4 || tokens[0] != "p" || tokens[1] != "cnf" {
                let kind = if tokens.first() == Some(&"p") {
                    ParseErrorKind::MalformedHeader
                } else {
                    ParseErrorKind::MissingHeader
                };
                return Err(parse_error(line, kind));
            }
            let num_vars: u32 = tokens[2]
                .parse()
                .map_err(|_| parse_error(line, ParseErrorKind::MalformedHeader))?;
            let declared: u64 = tokens[3]
                .parse()
                .map_err(|_| parse_error(line, ParseErrorKind::MalformedHeader))?;
            if num_vars == 0 {
                return Err(parse_error(line, ParseErrorKind::ZeroVariables));
            }
            header = Some((num_vars, declared));
            continue;
        };
        if found == declared {
            return Err(parse_error(
                line,
                ParseErrorKind::ClauseCountMismatch {
                    declared,
                    found: found + 1,
                },
            ));
        }
        if let Some(body) = text.strip_prefix('x') {
            let lits = parse_literal_line(body, line, num_vars)?;
            let rhs = lits.iter().filter(|&&l| l < 0).count() % 2 == 0;
            let xor = XorConstraint::new(lits.iter().map(|l| l.unsigned_abs()), rhs)
                .expect("literals are nonzero");
            xors.push(xor);
        } else {
            let lits = parse_literal_line(text, line, num_vars)?;
            if lits.is_empty() {
                return Err(parse_error(line, ParseErrorKind::EmptyClause));
            }
            let clause = Clause::new(
                lits.iter()
                    .map(|&l| Lit::from_dimacs(l).expect("literals are nonzero")),
            )
            .expect("line is nonempty");
            clauses.push(clause);
        }
        found += 1;
    }

    let (num_vars, declared) =
        header.ok_or_else(|| parse_error(last_line.max(1), ParseErrorKind::MissingHeader))?;
    if found != declared {
        return Err(parse_error(
            last_line,
            ParseErrorKind::ClauseCountMismatch { declared, found },
        ));
    }
    Ok(CnfFormula::new(num_vars, clauses, xors).expect("ranges checked during parse"))
}

/// Renders a formula back to DIMACS text: header, then clauses, then parity
/// lines, single spaces, each line terminated by ` 0\n`.
///
/// A parity constraint with `rhs = false` is written with its first literal
/// negated. The empty tautologous constraint has no spelling in this format
/// and is omitted; it constrains nothing, so the parsed formula is
/// equisatisfiable with the same model set.
pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let printable_xors: Vec<&XorConstraint> = formula
        .xors()
        .iter()
        .filter(|x| !x.is_tautology())
        .collect();
    let total = formula.clauses().len() + printable_xors.len();
    let mut out = format!("p cnf {} {}\n", formula.num_vars(), total);
    for clause in formula.clauses() {
        for lit in clause.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    for xor in printable_xors {
        out.push('x');
        for (i, &v) in xor.vars().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if i == 0 && !xor.rhs() {
                out.push('-');
            }
            out.push_str(&v.to_string());
        }
        out.push_str(" 0\n");
    }
    out
}

/// Draws a random 3-CNF formula: `m` clauses, each over three distinct
/// variables chosen uniformly from `1..=n`, each sign a fair coin.
/// The same `(n, m, seed)` triple always yields the same formula.
pub fn generate_random_3cnf(n: u32, m: u32, seed: u64) -> Result<CnfFormula, FormulaError> {
    if n < 3 {
        return Err(FormulaError::TooFewVariables { n });
    }
    let mut stream = RngStream::from_seed(seed);
    let mut clauses = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let mut vars = [0u32; 3];
        for slot in 0..3 {
            vars[slot] = loop {
                let v = 1 + stream.below(n as u64) as u32;
                if !vars[..slot].contains(&v) {
                    break v;
                }
            };
        }
        let lits = vars.map(|v| Lit::new(v, stream.coin()));
        clauses.push(Clause::new(lits).expect("three distinct variables"));
    }
    Ok(CnfFormula::new(n, clauses, Vec::new()).expect("variables drawn in range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(code: i32) -> Lit {
        Lit::from_dimacs(code).unwrap()
    }

    #[test]
    fn parses_plain_cnf() {
        let f = parse_dimacs("c tiny\np cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.clauses().len(), 2);
        assert_eq!(f.clauses()[0].literals(), &[lit(1), lit(-2)]);
        assert_eq!(f.clauses()[1].literals(), &[lit(2), lit(3)]);
        assert!(f.xors().is_empty());
    }

    #[test]
    fn parses_parity_line() {
        let f = parse_dimacs("p cnf 3 1\nx1 -2 0\n").unwrap();
        assert!(f.clauses().is_empty());
        assert_eq!(f.xors().len(), 1);
        assert_eq!(f.xors()[0].vars(), &[1, 2]);
        // One negated literal flips the asserted parity from true to false.
        assert!(!f.xors()[0].rhs());
    }

    #[test]
    fn parity_line_with_detached_prefix() {
        let a = parse_dimacs("p cnf 3 1\nx1 -2 0\n").unwrap();
        let b = parse_dimacs("p cnf 3 1\nx 1 -2 0\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_variable_with_line() {
        let err = parse_dimacs("p cnf 2 1\n1 3 0\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(
            err.kind,
            ParseErrorKind::VarOutOfRange {
                var: 3,
                num_vars: 2
            }
        );
    }

    #[test]
    fn rejects_clause_count_mismatch() {
        let err = parse_dimacs("p cnf 2 2\n1 0\n").unwrap_err();
        assert_eq!(
            err.kind,
            ParseErrorKind::ClauseCountMismatch {
                declared: 2,
                found: 1
            }
        );
        let err = parse_dimacs("p cnf 2 1\n1 0\n2 0\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn rejects_missing_terminator_and_trailing_tokens() {
        let err = parse_dimacs("p cnf 2 1\n1 2\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnterminatedClause);
        let err = parse_dimacs("p cnf 2 1\n1 0 2 0\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::TrailingTokens);
    }

    #[test]
    fn rejects_missing_header() {
        let err = parse_dimacs("1 2 0\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingHeader);
        let err = parse_dimacs("").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingHeader);
    }

    #[test]
    fn emits_empty_formula_header_only() {
        assert_eq!(emit_dimacs(&CnfFormula::empty(4)), "p cnf 4 0\n");
    }

    #[test]
    fn emits_parity_lines_in_clause_total() {
        let xor = XorConstraint::new([1, 2], false).unwrap();
        let f = CnfFormula::new(3, vec![], vec![xor]).unwrap();
        assert_eq!(emit_dimacs(&f), "p cnf 3 1\nx-1 2 0\n");
    }

    #[test]
    fn emits_contradictory_parity_as_bare_terminator() {
        let xor = XorConstraint::new([], true).unwrap();
        let f = CnfFormula::new(2, vec![], vec![xor]).unwrap();
        let text = emit_dimacs(&f);
        assert_eq!(text, "p cnf 2 1\nx 0\n");
        assert_eq!(parse_dimacs(&text).unwrap(), f);
    }

    #[test]
    fn round_trips_mixed_formula() {
        let text = "p cnf 5 4\n1 -2 5 0\n-1 3 0\nx2 4 5 0\nx-3 1 0\n";
        let f = parse_dimacs(text).unwrap();
        assert_eq!(parse_dimacs(&emit_dimacs(&f)).unwrap(), f);
    }

    #[test]
    fn clause_drops_duplicate_literals_keeps_tautology() {
        let c = Clause::new([lit(1), lit(1), lit(-1)]).unwrap();
        assert_eq!(c.literals(), &[lit(1), lit(-1)]);
        assert!(c.is_tautology());
        assert_eq!(Clause::new([]), Err(FormulaError::EmptyClause));
    }

    #[test]
    fn xor_cancels_repeated_variables() {
        let x = XorConstraint::new([3, 1, 3], true).unwrap();
        assert_eq!(x.vars(), &[1]);
        let x = XorConstraint::new([2, 2], true).unwrap();
        assert!(x.is_contradiction());
        let x = XorConstraint::new([2, 2], false).unwrap();
        assert!(x.is_tautology());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_3cnf(5, 10, 42).unwrap();
        let b = generate_random_3cnf(5, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_random_3cnf(5, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_clauses_use_three_distinct_variables() {
        let f = generate_random_3cnf(6, 40, 7).unwrap();
        assert_eq!(f.clauses().len(), 40);
        for clause in f.clauses() {
            assert_eq!(clause.len(), 3);
            let mut vars: Vec<u32> = clause.literals().iter().map(|l| l.var()).collect();
            vars.sort_unstable();
            vars.dedup();
            assert_eq!(vars.len(), 3);
            assert!(vars.iter().all(|&v| (1..=6).contains(&v)));
        }
    }

    #[test]
    fn generator_rejects_fewer_than_three_variables() {
        assert_eq!(
            generate_random_3cnf(2, 5, 1),
            Err(FormulaError::TooFewVariables { n: 2 })
        );
    }

    #[test]
    fn assignment_from_index_uses_low_bits() {
        let a = Assignment::from_index(4, 0b0101);
        assert!(a.value(1));
        assert!(!a.value(2));
        assert!(a.value(3));
        assert!(!a.value(4));
    }
}
