//! Approximate model counting from satisfiability answers alone.
//!
//! One run draws a fresh chain of random parity conditions and reports the
//! minimal depth at which the conditioned formula becomes unsatisfiable.
//! Runs are cheap because the chain is probed, not enumerated: a warm start
//! jumps near the depth previous runs settled around, leaps further down
//! while the prefix stays unsatisfiable, then scans up to the first
//! unsatisfiable level. Across runs, the fraction that die by depth `d`
//! estimates the avoidance proportion `(1 - 2^-d)^count`, which inverts to
//! a count estimate. The dynamic variant watches a confidence interval on
//! that fraction and stops as soon as the implied count interval is tight.

use serde::Serialize;

use crate::formula::{CnfFormula, XorConstraint};
use crate::hashing::{draw_hash, hash_to_constraint};
use crate::rng::RngStream;
use crate::solver::{self, SolverError, Status};
use crate::stats::{
    estimate_count, interval_normal, interval_wilson, normal_quantile, AccuracyParams,
    ConfidenceInterval, IntervalMethod,
};

/// Tally of completed runs by depth: `count_above(d)` is how many runs
/// ended strictly deeper than `d`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepthHistogram {
    above: Vec<u64>,
    runs: u64,
}

impl DepthHistogram {
    pub fn record(&mut self, depth: u32) {
        if self.above.len() < depth as usize {
            self.above.resize(depth as usize, 0);
        }
        for slot in &mut self.above[..depth as usize] {
            *slot += 1;
        }
        self.runs += 1;
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    /// Runs whose depth exceeded `depth`. Never increases with `depth`.
    pub fn count_above(&self, depth: u32) -> u64 {
        self.above.get(depth as usize).copied().unwrap_or(0)
    }

    /// Deepest recorded run.
    pub fn max_depth(&self) -> u32 {
        self.above.len() as u32
    }

    /// The depth whose exceedance count is closest to half the runs, the
    /// shallowest on ties. Exact integer arithmetic, no rounding hazards.
    pub fn select_depth(&self) -> u32 {
        let mut best = 0u32;
        let mut best_distance = u64::MAX;
        for depth in 0..=self.max_depth() {
            let distance = (2 * self.count_above(depth)).abs_diff(self.runs);
            if distance < best_distance {
                best = depth;
                best_distance = distance;
            }
        }
        best
    }
}

/// Rolling mean of observed depths, used to pick warm-start levels.
#[derive(Clone, Debug)]
pub struct LeapFrogState {
    offset: u32,
    total_depth: u64,
    runs: u64,
}

impl LeapFrogState {
    /// `offset` is both the cushion below the mean where warm probes start
    /// and the stride of downward jumps. Must be at least 1.
    pub fn new(offset: u32) -> LeapFrogState {
        assert!(offset >= 1, "a zero offset cannot make downward progress");
        LeapFrogState {
            offset,
            total_depth: 0,
            runs: 0,
        }
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn record(&mut self, depth: u32) {
        self.total_depth += depth as u64;
        self.runs += 1;
    }

    /// Warm-start level: the rounded mean depth minus the offset, floored
    /// at zero. `None` until a first run has completed.
    pub fn start_hint(&self) -> Option<u32> {
        if self.runs == 0 {
            return None;
        }
        let mean = (self.total_depth as f64 / self.runs as f64).round() as i64;
        Some(mean.saturating_sub(self.offset as i64).max(0) as u32)
    }
}

/// Outcome of one depth-probing run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepthSample {
    pub depth: u32,
    /// Satisfiability queries this run spent.
    pub queries: u64,
}

/// Knobs shared by the counters.
#[derive(Clone, Copy, Debug)]
pub struct CounterOptions {
    pub leapfrog: bool,
    pub offset: u32,
    pub solve_budget: Option<u64>,
}

impl Default for CounterOptions {
    fn default() -> Self {
        CounterOptions {
            leapfrog: true,
            offset: 5,
            solve_budget: None,
        }
    }
}

/// A lazily materialized chain of hash conditions over one formula. Levels
/// are drawn from the stream on first use, so the chain is a fixed random
/// object regardless of the order in which prefixes get probed.
struct ChainProbe<'a, 'b> {
    formula: &'a CnfFormula,
    stream: &'b mut RngStream,
    constraints: Vec<XorConstraint>,
    queries: u64,
}

impl<'a, 'b> ChainProbe<'a, 'b> {
    fn new(formula: &'a CnfFormula, stream: &'b mut RngStream) -> Self {
        ChainProbe {
            formula,
            stream,
            constraints: Vec::new(),
            queries: 0,
        }
    }

    fn ensure(&mut self, depth: u32) {
        while self.constraints.len() < depth as usize {
            let hash = draw_hash(self.formula.num_vars(), self.stream);
            self.constraints.push(hash_to_constraint(&hash));
        }
    }

    fn status(&mut self, depth: u32, budget: Option<u64>) -> Result<Status, SolverError> {
        self.ensure(depth);
        self.queries += 1;
        solver::solve_hashed(self.formula, &self.constraints[..depth as usize], budget)
            .map(|r| r.status)
    }

    fn scan_up(&mut self, from: u32, budget: Option<u64>) -> Result<u32, SolverError> {
        let ceiling = self.formula.num_vars() + 640;
        let mut depth = from;
        loop {
            if self.status(depth, budget)? == Status::Unsat {
                return Ok(depth);
            }
            depth += 1;
            assert!(
                depth <= ceiling,
                "hash chain failed to reach unsatisfiability"
            );
        }
    }
}

/// One run: draws a fresh chain from `stream` and finds the minimal depth
/// whose prefix is unsatisfiable. With no warm-start state the scan walks up
/// from depth 0; otherwise it probes the hinted level, leaps down while
/// unsatisfiable, and scans up from the first satisfiable level. Either way
/// the result depends only on the drawn chain.
pub fn get_depth(
    formula: &CnfFormula,
    stream: &mut RngStream,
    leap: Option<&mut LeapFrogState>,
    budget: Option<u64>,
) -> Result<DepthSample, SolverError> {
    let hint = leap.as_ref().and_then(|l| l.start_hint());
    let stride = leap.as_ref().map_or(1, |l| l.offset());
    let mut probe = ChainProbe::new(formula, stream);
    let depth = match hint {
        None => probe.scan_up(0, budget)?,
        Some(start) => {
            let mut level = start;
            loop {
                match probe.status(level, budget)? {
                    Status::Sat => break probe.scan_up(level + 1, budget)?,
                    Status::Unsat => {
                        if level == 0 {
                            break 0;
                        }
                        level = level.saturating_sub(stride);
                    }
                }
            }
        }
    };
    if let Some(l) = leap {
        l.record(depth);
    }
    Ok(DepthSample {
        depth,
        queries: probe.queries,
    })
}

/// An approximate count with the evidence that produced it. The interval,
/// when present, is on the count scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountEstimate {
    pub estimate: f64,
    pub chosen_depth: u32,
    pub runs_used: u64,
    pub sat_queries: u64,
    pub stopped_early: bool,
    pub interval: Option<ConfidenceInterval>,
}

/// Point estimate at `depth` plus the count-scale interval the proportion
/// interval induces there. `None` when the proportion sits on the boundary
/// or its interval reaches 0 or 1, where the inversion has no finite value.
fn depth_estimate_with_interval(
    hist: &DepthHistogram,
    depth: u32,
    z: f64,
    method: IntervalMethod,
) -> Option<(f64, ConfidenceInterval)> {
    let t = hist.runs();
    let above = hist.count_above(depth);
    if depth == 0 || above == 0 || above >= t {
        return None;
    }
    let q = (t - above) as f64 / t as f64;
    let ci = match method {
        IntervalMethod::Normal => interval_normal(q, t, z),
        IntervalMethod::Wilson => interval_wilson(q, t, z),
    };
    if ci.lower <= 0.0 || ci.upper >= 1.0 {
        return None;
    }
    // A vanishing lower bound would blow the count bound up to infinity;
    // floor it so the comparison stays finite.
    let lower_q = ci.lower.max(1e-12);
    let point = estimate_count(depth, q).expect("proportion is interior");
    let upper_count = estimate_count(depth, lower_q).expect("proportion is interior");
    let lower_count = estimate_count(depth, ci.upper).expect("proportion is interior");
    Some((
        point,
        ConfidenceInterval {
            lower: lower_count,
            upper: upper_count,
        },
    ))
}

/// First depth, shallowest first, whose count interval is tight enough for
/// the accuracy target.
fn stopping_check(
    hist: &DepthHistogram,
    z: f64,
    epsilon: f64,
    method: IntervalMethod,
) -> Option<(u32, f64, ConfidenceInterval)> {
    for depth in 1..=hist.max_depth() {
        if let Some((point, interval)) = depth_estimate_with_interval(hist, depth, z, method) {
            if interval.upper < (1.0 + epsilon) * point
                && interval.lower > point / (1.0 + epsilon)
            {
                return Some((depth, point, interval));
            }
        }
    }
    None
}

fn from_histogram(hist: &DepthHistogram, queries: u64) -> CountEstimate {
    let depth = hist.select_depth();
    if depth == 0 {
        return CountEstimate {
            estimate: 0.0,
            chosen_depth: 0,
            runs_used: hist.runs(),
            sat_queries: queries,
            stopped_early: false,
            interval: None,
        };
    }
    let runs = hist.runs();
    let above = hist.count_above(depth);
    // A nonzero selected depth implies an interior exceedance count: depths
    // 0 and max always sit at the full distance, so they only win when
    // every intermediate count does too.
    debug_assert!(above > 0 && above < runs);
    let proportion = (runs - above) as f64 / runs as f64;
    let estimate = estimate_count(depth, proportion).expect("proportion is interior");
    CountEstimate {
        estimate,
        chosen_depth: depth,
        runs_used: runs,
        sat_queries: queries,
        stopped_early: false,
        interval: None,
    }
}

/// Fixed-budget counter: `runs` depth samples, then the depth whose
/// exceedance count is nearest half splits the histogram into the estimate.
/// Returns 0 exactly when the selected depth is 0, which is the
/// unsatisfiable (or hopelessly undersampled) case.
pub fn stac(
    formula: &CnfFormula,
    runs: u64,
    seed: u64,
    options: &CounterOptions,
) -> Result<CountEstimate, SolverError> {
    let master = RngStream::from_seed(seed);
    let mut leap = options.leapfrog.then(|| LeapFrogState::new(options.offset));
    let mut hist = DepthHistogram::default();
    let mut queries = 0u64;
    for run in 0..runs {
        let mut stream = master.derive(run);
        let sample = get_depth(formula, &mut stream, leap.as_mut(), options.solve_budget)?;
        hist.record(sample.depth);
        queries += sample.queries;
    }
    Ok(from_histogram(&hist, queries))
}

/// Dynamic-stopping counter: identical sampling, but after every run each
/// depth's count interval is tested against the accuracy target, and the
/// first tight depth ends the experiment. Falls back to the fixed-budget
/// selection when `max_runs` samples never tighten.
pub fn stac_dsc(
    formula: &CnfFormula,
    max_runs: u64,
    params: &AccuracyParams,
    method: IntervalMethod,
    seed: u64,
    options: &CounterOptions,
) -> Result<CountEstimate, SolverError> {
    let z = normal_quantile(1.0 - params.delta() / 2.0)
        .expect("validated delta keeps the probability in range");
    let master = RngStream::from_seed(seed);
    let mut leap = options.leapfrog.then(|| LeapFrogState::new(options.offset));
    let mut hist = DepthHistogram::default();
    let mut queries = 0u64;
    for run in 0..max_runs {
        let mut stream = master.derive(run);
        let sample = get_depth(formula, &mut stream, leap.as_mut(), options.solve_budget)?;
        hist.record(sample.depth);
        queries += sample.queries;
        if let Some((depth, point, interval)) =
            stopping_check(&hist, z, params.epsilon(), method)
        {
            return Ok(CountEstimate {
                estimate: point,
                chosen_depth: depth,
                runs_used: hist.runs(),
                sat_queries: queries,
                stopped_early: true,
                interval: Some(interval),
            });
        }
    }
    let mut result = from_histogram(&hist, queries);
    result.interval = depth_estimate_with_interval(&hist, result.chosen_depth, z, method)
        .map(|(_, interval)| interval);
    Ok(result)
}
