//! Statistical primitives shared by the counters and the harness: the map
//! between hash depth, avoidance proportion, and model count; the standard
//! normal quantile; binomial confidence intervals; and the formula that
//! turns an accuracy target into a run count.

use num::traits::ToPrimitive;
use num::{BigUint, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("quantile probability {0} outside (0, 1)")]
    QuantileDomain(f64),
    #[error("proportion {0} cannot anchor a count estimate; need 0 < q < 1")]
    UnusableProportion(f64),
    #[error("need epsilon > 0 and 0 < delta < 1, got epsilon {epsilon}, delta {delta}")]
    InvalidAccuracy { epsilon: f64, delta: f64 },
}

/// A multiplicative accuracy target: the estimate should fall within a
/// factor `1 + epsilon` of the truth with probability at least `1 - delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyParams {
    epsilon: f64,
    delta: f64,
}

impl AccuracyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<AccuracyParams, StatsError> {
        if epsilon > 0.0 && epsilon.is_finite() && delta > 0.0 && delta < 1.0 {
            Ok(AccuracyParams { epsilon, delta })
        } else {
            Err(StatsError::InvalidAccuracy { epsilon, delta })
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Which binomial interval the dynamic stopping rule consults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Normal,
    Wilson,
}

impl std::fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IntervalMethod::Normal => "normal",
            IntervalMethod::Wilson => "wilson",
        })
    }
}

impl std::str::FromStr for IntervalMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(IntervalMethod::Normal),
            "wilson" => Ok(IntervalMethod::Wilson),
            other => Err(format!("unknown interval method `{other}`")),
        }
    }
}

/// A two-sided confidence interval on a proportion, clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Avoidance proportion `(1 - 2^-depth)^count`: the large-space limit of
/// the chance that `depth` independent hash conditions eliminate all
/// `count` models of a formula.
pub fn q_of(depth: u32, count: &BigUint) -> f64 {
    if count.is_zero() {
        return 1.0;
    }
    if depth == 0 {
        return 0.0;
    }
    let base_delta = -0.5f64.powi(depth as i32);
    if count.is_one() {
        // One minus a power of two is exact here; callers compare this
        // single-model case against exact rationals.
        return 1.0 + base_delta;
    }
    let c = count.to_f64().unwrap_or(f64::INFINITY);
    (c * base_delta.ln_1p()).exp()
}

/// `q_of` for machine-width counts.
pub fn q_of_u64(depth: u32, count: u64) -> f64 {
    q_of(depth, &BigUint::from(count))
}

/// Inverts `q_of` at a fixed depth: the count whose avoidance proportion
/// would be `proportion`. Meaningful only for `depth >= 1` and proportions
/// strictly inside `(0, 1)`.
pub fn estimate_count(depth: u32, proportion: f64) -> Result<f64, StatsError> {
    assert!(depth >= 1, "depth 0 leaves the logarithm base undefined");
    if !(proportion > 0.0 && proportion < 1.0) {
        return Err(StatsError::UnusableProportion(proportion));
    }
    let base_ln = (-0.5f64.powi(depth as i32)).ln_1p();
    Ok(proportion.ln() / base_ln)
}

const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;
const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function by its power series, accurate for `0 <= z < 2`.
fn erf_series(z: f64) -> f64 {
    let ratio = 2.0 * z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0u32;
    while term > sum * 1e-17 && k < 200 {
        k += 1;
        term *= ratio / (2 * k + 1) as f64;
        sum += term;
    }
    TWO_OVER_SQRT_PI * (-z * z).exp() * sum
}

/// Regularized upper incomplete gamma `Q(1/2, x)` by continued fraction
/// (modified Lentz), accurate for `x` past roughly 2.
fn upper_gamma_half(x: f64) -> f64 {
    let a = 0.5;
    let fpmin = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=300 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + 0.5 * x.ln() - LN_SQRT_PI).exp() * h
}

/// Complementary error function, absolute error near machine precision and
/// relative error preserved in the decaying tail.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 1.5 {
        1.0 - erf_series(x)
    } else {
        upper_gamma_half(x * x)
    }
}

/// Standard normal cumulative distribution function.
fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: rational initial guess refined by one Halley
/// step against the CDF above. Absolute error well under 1e-9 across the
/// open unit interval.
pub fn normal_quantile(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::QuantileDomain(p));
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |p_tail: f64| {
        let q = (-2.0 * p_tail.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let mut x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };

    let residual = normal_cdf(x) - p;
    let update = residual * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= update / (1.0 + x * update / 2.0);
    Ok(x)
}

/// Plain normal approximation interval for a proportion observed over
/// `runs` trials, at critical value `z`.
pub fn interval_normal(q: f64, runs: u64, z: f64) -> ConfidenceInterval {
    let t = runs as f64;
    let half = z * (q * (1.0 - q) / t).sqrt();
    ConfidenceInterval {
        lower: (q - half).max(0.0),
        upper: (q + half).min(1.0),
    }
}

/// Wilson score interval for a proportion observed over `runs` trials.
/// Better behaved than the normal interval near 0 and 1 and at small `runs`.
pub fn interval_wilson(q: f64, runs: u64, z: f64) -> ConfidenceInterval {
    let t = runs as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / t;
    let center = (q + z2 / (2.0 * t)) / denom;
    let half = z * (q * (1.0 - q) / t + z2 / (4.0 * t * t)).sqrt() / denom;
    ConfidenceInterval {
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

/// Runs required for the accuracy target: the worst case over the anchor
/// proportions 0.4 and 0.65 of two constraints, one keeping the sampling
/// noise inside the tolerance band above the proportion, one below.
pub fn compute_t(params: &AccuracyParams) -> u64 {
    let z = normal_quantile(1.0 - params.delta() / 2.0)
        .expect("validated delta keeps the probability in range");
    let eps = params.epsilon();
    let mut runs = 0u64;
    for q in [0.4f64, 0.65] {
        let above = (z / (2.0 * q * (1.0 - q.powf(eps)))).powi(2);
        let below = (z / (2.0 * (q.powf(1.0 / (1.0 + eps)) - q))).powi(2);
        runs = runs.max(above.ceil() as u64).max(below.ceil() as u64);
    }
    runs
}

/// Smallest depth whose avoidance proportion lands in `[0.4, 0.65]`, with
/// that proportion, if any depth lands there.
pub fn qd_window(count: &BigUint) -> Option<(u32, f64)> {
    for depth in 1..=4096 {
        let q = q_of(depth, count);
        if q > 0.65 {
            return None;
        }
        if q >= 0.4 {
            return Some((depth, q));
        }
    }
    None
}

/// Smallest depth `d` such that the depth distribution concentrates in
/// `[d, d + 7]`: below-window mass under 0.05 and through-window mass above
/// 0.95.
pub fn depth_window(count: &BigUint) -> Option<u32> {
    for depth in 0..=4096 {
        if q_of(depth, count) >= 0.05 {
            return None;
        }
        if q_of(depth + 7, count) > 0.95 {
            return Some(depth);
        }
    }
    None
}
