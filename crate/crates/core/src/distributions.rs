//! Beliefs about the demand intercept.
//!
//! Every built-in kind carries exact closed forms for the cdf, survival
//! function, partial expectation `E(α - t)⁺` and mean residual life
//! `m(t) = E(α - t | α > t)`. Nothing here integrates numerically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid piecewise-linear cdf: {0}")]
    InvalidKnots(String),
}

/// Distribution family and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BeliefKind {
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    /// Beta(1, λ): survival `(1 - t)^λ` on `[0, 1]`.
    BetaOneLambda { lambda: f64 },
    Pareto { scale: f64, shape: f64 },
    /// Constant density on `[a1, b1] ∪ [a2, b2]`.
    TwoIntervalUniform { a1: f64, b1: f64, a2: f64, b2: f64 },
    /// Continuous cdf interpolated linearly between `(x, F(x))` knots.
    PiecewiseLinearCdf { knots: Vec<(f64, f64)> },
}

/// Survival values at strictly increasing abscissae plus the integral of the
/// survival function to the right of each knot.
#[derive(Debug, Clone, PartialEq)]
struct PiecewiseTable {
    xs: Vec<f64>,
    surv: Vec<f64>,
    tail: Vec<f64>,
}

impl PiecewiseTable {
    fn from_knots(knots: &[(f64, f64)]) -> Result<Self, BeliefError> {
        if knots.len() < 2 {
            return Err(BeliefError::InvalidKnots("need at least two knots".into()));
        }
        for (i, &(x, f)) in knots.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() {
                return Err(BeliefError::InvalidKnots(format!("knot {i} is not finite")));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(BeliefError::InvalidKnots(format!("knot {i}: F = {f} outside [0, 1]")));
            }
            if i > 0 {
                let (px, pf) = knots[i - 1];
                if x <= px {
                    return Err(BeliefError::InvalidKnots(format!(
                        "abscissae must be strictly increasing (knot {i})"
                    )));
                }
                if f < pf {
                    return Err(BeliefError::InvalidKnots(format!("cdf decreases at knot {i}")));
                }
            }
        }
        if knots[0].0 < 0.0 {
            return Err(BeliefError::InvalidKnots("demand intercept must be non-negative".into()));
        }
        if knots[0].1 != 0.0 || knots[knots.len() - 1].1 != 1.0 {
            return Err(BeliefError::InvalidKnots("cdf must start at 0 and end at 1".into()));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let surv: Vec<f64> = knots.iter().map(|k| 1.0 - k.1).collect();
        let mut tail = vec![0.0; xs.len()];
        for i in (0..xs.len() - 1).rev() {
            tail[i] = tail[i + 1] + 0.5 * (xs[i + 1] - xs[i]) * (surv[i] + surv[i + 1]);
        }
        Ok(Self { xs, surv, tail })
    }

    fn lower(&self) -> f64 {
        // last knot still carrying F = 0
        let j = self.surv.iter().rposition(|&s| s == 1.0).unwrap_or(0);
        self.xs[j]
    }

    fn upper(&self) -> f64 {
        let j = self.surv.iter().position(|&s| s == 0.0).unwrap_or(self.xs.len() - 1);
        self.xs[j]
    }

    fn mean(&self) -> f64 {
        self.xs[0] + self.tail[0]
    }

    /// Segment index `i` with `xs[i] <= t < xs[i + 1]`; caller guarantees
    /// `xs[0] <= t < xs[last]`.
    fn segment(&self, t: f64) -> usize {
        self.xs.partition_point(|&x| x <= t) - 1
    }

    fn survival(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if t <= self.xs[0] {
            return 1.0;
        }
        if t >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(t);
        let u = (t - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.surv[i] * (1.0 - u) + self.surv[i + 1] * u
    }

    fn partial_expectation(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if t <= self.xs[0] {
            return self.mean() - t;
        }
        if t >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(t);
        0.5 * (self.xs[i + 1] - t) * (self.survival(t) + self.surv[i + 1]) + self.tail[i + 1]
    }

    fn density(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if t < self.xs[0] || t >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(t);
        (self.surv[i] - self.surv[i + 1]) / (self.xs[i + 1] - self.xs[i])
    }

    fn quantile(&self, p: f64) -> f64 {
        self.inverse_survival(1.0 - p)
    }

    fn inverse_survival(&self, target: f64) -> f64 {
        if target >= 1.0 {
            return self.lower();
        }
        if target <= 0.0 {
            return self.upper();
        }
        // first segment whose right-end survival drops to or below the target
        let i = self.surv.partition_point(|&s| s > target);
        let i = i.clamp(1, self.xs.len() - 1);
        let (s0, s1) = (self.surv[i - 1], self.surv[i]);
        let u = (s0 - target) / (s0 - s1);
        self.xs[i - 1] + u * (self.xs[i] - self.xs[i - 1])
    }
}

/// Outcome of a decreasing-mean-residual-life test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum DmrlVerdict {
    AnalyticYes,
    AnalyticNo,
    Numeric {
        non_increasing: bool,
        /// Largest increase of `m` between adjacent grid points.
        max_increase: f64,
        grid_points: usize,
    },
}

impl DmrlVerdict {
    pub fn is_dmrl(&self) -> bool {
        match *self {
            DmrlVerdict::AnalyticYes => true,
            DmrlVerdict::AnalyticNo => false,
            DmrlVerdict::Numeric { non_increasing, .. } => non_increasing,
        }
    }
}

/// Grid used for numeric DMRL verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmrlGrid {
    pub points: usize,
    /// Right end of the grid is `quantile(1 - tail_mass)`.
    pub tail_mass: f64,
    pub tolerance: f64,
}

impl Default for DmrlGrid {
    fn default() -> Self {
        Self { points: 10_000, tail_mass: 1e-6, tolerance: 1e-9 }
    }
}

/// A non-atomic belief about the demand intercept α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeliefSpec", into = "BeliefSpec")]
pub struct DemandBelief {
    kind: BeliefKind,
    low: f64,
    high: f64,
    mean: f64,
    table: Option<PiecewiseTable>,
}

fn positive(name: &'static str, value: f64) -> Result<f64, BeliefError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BeliefError::InvalidParameter { name, value, reason: "must be positive and finite" })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, BeliefError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(BeliefError::InvalidParameter { name, value, reason: "must be non-negative and finite" })
    }
}

impl DemandBelief {
    pub fn uniform(low: f64, high: f64) -> Result<Self, BeliefError> {
        non_negative("aL", low)?;
        if !(high.is_finite() && high > low) {
            return Err(BeliefError::InvalidParameter { name: "aH", value: high, reason: "must be finite and exceed aL" });
        }
        Ok(Self {
            kind: BeliefKind::Uniform { low, high },
            low,
            high,
            mean: 0.5 * (low + high),
            table: None,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self, BeliefError> {
        positive("lambda", rate)?;
        Ok(Self {
            kind: BeliefKind::Exponential { rate },
            low: 0.0,
            high: f64::INFINITY,
            mean: 1.0 / rate,
            table: None,
        })
    }

    pub fn beta_one_lambda(lambda: f64) -> Result<Self, BeliefError> {
        positive("lambda", lambda)?;
        Ok(Self {
            kind: BeliefKind::BetaOneLambda { lambda },
            low: 0.0,
            high: 1.0,
            mean: 1.0 / (1.0 + lambda),
            table: None,
        })
    }

    /// Pareto with `F(t) = 1 - (scale / t)^shape` on `[scale, ∞)`; the mean is
    /// finite only for `shape > 1`.
    pub fn pareto(scale: f64, shape: f64) -> Result<Self, BeliefError> {
        positive("aL", scale)?;
        if !(shape.is_finite() && shape > 1.0) {
            return Err(BeliefError::InvalidParameter { name: "k", value: shape, reason: "must exceed 1 for a finite mean" });
        }
        Ok(Self {
            kind: BeliefKind::Pareto { scale, shape },
            low: scale,
            high: f64::INFINITY,
            mean: shape * scale / (shape - 1.0),
            table: None,
        })
    }

    pub fn two_interval_uniform(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self, BeliefError> {
        non_negative("a1", a1)?;
        for (name, lo, hi) in [("b1", a1, b1), ("a2", b1, a2), ("b2", a2, b2)] {
            let ordered = if name == "a2" { hi >= lo } else { hi > lo };
            if !(hi.is_finite() && ordered) {
                return Err(BeliefError::InvalidParameter { name, value: hi, reason: "intervals must satisfy a1 < b1 <= a2 < b2" });
            }
        }
        let w1 = (b1 - a1) / ((b1 - a1) + (b2 - a2));
        let mut knots = vec![(a1, 0.0), (b1, w1)];
        if a2 > b1 {
            knots.push((a2, w1));
        }
        knots.push((b2, 1.0));
        let table = PiecewiseTable::from_knots(&knots)?;
        Ok(Self {
            kind: BeliefKind::TwoIntervalUniform { a1, b1, a2, b2 },
            low: a1,
            high: b2,
            mean: table.mean(),
            table: Some(table),
        })
    }

    /// Linear interpolation between `(x, F(x))` knots; rejects anything that
    /// would put an atom on a single point.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, BeliefError> {
        let table = PiecewiseTable::from_knots(&knots)?;
        Ok(Self {
            low: table.lower(),
            high: table.upper(),
            mean: table.mean(),
            kind: BeliefKind::PiecewiseLinearCdf { knots },
            table: Some(table),
        })
    }

    pub fn kind(&self) -> &BeliefKind {
        &self.kind
    }

    /// α_L: the largest lower bound of the support.
    pub fn support_low(&self) -> f64 {
        self.low
    }

    /// α_H: the smallest upper bound of the support, possibly `+∞`.
    pub fn support_high(&self) -> f64 {
        self.high
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= self.low {
            return 1.0;
        }
        if t >= self.high {
            return 0.0;
        }
        match self.kind {
            BeliefKind::Uniform { low, high } => (high - t) / (high - low),
            BeliefKind::Exponential { rate } => (-rate * t).exp(),
            BeliefKind::BetaOneLambda { lambda } => (1.0 - t).powf(lambda),
            BeliefKind::Pareto { scale, shape } => (scale / t).powf(shape),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                self.piecewise().survival(t)
            }
        }
    }

    /// `E(α - t)⁺ = ∫_t^∞ (1 - F(x)) dx`.
    pub fn partial_expectation(&self, t: f64) -> f64 {
        if t <= self.low {
            return self.mean - t;
        }
        if t >= self.high {
            return 0.0;
        }
        match self.kind {
            BeliefKind::Uniform { low, high } => (high - t).powi(2) / (2.0 * (high - low)),
            BeliefKind::Exponential { rate } => (-rate * t).exp() / rate,
            BeliefKind::BetaOneLambda { lambda } => (1.0 - t).powf(lambda + 1.0) / (lambda + 1.0),
            BeliefKind::Pareto { scale, shape } => t * (scale / t).powf(shape) / (shape - 1.0),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                self.piecewise().partial_expectation(t)
            }
        }
    }

    /// Mean residual life. Below the support this is `mean - t`; where the
    /// survival function vanishes it is 0.
    pub fn mrl(&self, t: f64) -> f64 {
        if t <= self.low {
            return self.mean - t;
        }
        if t >= self.high {
            return 0.0;
        }
        match self.kind {
            BeliefKind::Uniform { high, .. } => 0.5 * (high - t),
            BeliefKind::Exponential { rate } => 1.0 / rate,
            BeliefKind::BetaOneLambda { lambda } => (1.0 - t) / (1.0 + lambda),
            BeliefKind::Pareto { shape, .. } => t / (shape - 1.0),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                let table = self.piecewise();
                let s = table.survival(t);
                if s > 0.0 {
                    table.partial_expectation(t) / s
                } else {
                    0.0
                }
            }
        }
    }

    /// Density where one exists (right-continuous at kinks).
    pub fn density(&self, t: f64) -> f64 {
        if t < self.low || t >= self.high {
            return 0.0;
        }
        match self.kind {
            BeliefKind::Uniform { low, high } => 1.0 / (high - low),
            BeliefKind::Exponential { rate } => rate * (-rate * t).exp(),
            BeliefKind::BetaOneLambda { lambda } => lambda * (1.0 - t).powf(lambda - 1.0),
            BeliefKind::Pareto { scale, shape } => shape * scale.powf(shape) / t.powf(shape + 1.0),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                self.piecewise().density(t)
            }
        }
    }

    /// Failure rate `f(t) / (1 - F(t))`; infinite at the support top.
    pub fn hazard(&self, t: f64) -> f64 {
        let s = self.survival(t);
        if s > 0.0 {
            self.density(t) / s
        } else {
            f64::INFINITY
        }
    }

    /// Inverse cdf for `p ∈ [0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.kind {
            BeliefKind::Uniform { low, high } => low + p * (high - low),
            BeliefKind::Exponential { rate } => -(-p).ln_1p() / rate,
            BeliefKind::BetaOneLambda { lambda } => 1.0 - (1.0 - p).powf(1.0 / lambda),
            BeliefKind::Pareto { scale, shape } => scale * (1.0 - p).powf(-1.0 / shape),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                self.piecewise().quantile(p)
            }
        }
    }

    /// Smallest `t` with `survival(t) = s`, accurate for survival levels far
    /// below machine epsilon where `quantile(1 - s)` would round to the top.
    pub fn inverse_survival(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self.kind {
            BeliefKind::Uniform { low, high } => high - s * (high - low),
            BeliefKind::Exponential { rate } => -s.ln() / rate,
            BeliefKind::BetaOneLambda { lambda } => 1.0 - s.powf(1.0 / lambda),
            BeliefKind::Pareto { scale, shape } => scale * s.powf(-1.0 / shape),
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                self.piecewise().inverse_survival(s)
            }
        }
    }

    pub fn is_dmrl(&self) -> DmrlVerdict {
        self.is_dmrl_with(&DmrlGrid::default())
    }

    pub fn is_dmrl_with(&self, grid: &DmrlGrid) -> DmrlVerdict {
        match self.kind {
            BeliefKind::Uniform { .. } | BeliefKind::Exponential { .. } | BeliefKind::BetaOneLambda { .. } => {
                DmrlVerdict::AnalyticYes
            }
            BeliefKind::Pareto { .. } => DmrlVerdict::AnalyticNo,
            BeliefKind::TwoIntervalUniform { .. } | BeliefKind::PiecewiseLinearCdf { .. } => {
                let points = grid.points.max(2);
                let lo = self.low;
                let hi = self.quantile(1.0 - grid.tail_mass);
                let step = (hi - lo) / (points - 1) as f64;
                let mut prev = self.mrl(lo);
                let mut max_increase = f64::NEG_INFINITY;
                for i in 1..points {
                    let m = self.mrl(lo + step * i as f64);
                    max_increase = max_increase.max(m - prev);
                    prev = m;
                }
                DmrlVerdict::Numeric {
                    non_increasing: max_increase <= grid.tolerance,
                    max_increase,
                    grid_points: points,
                }
            }
        }
    }

    fn piecewise(&self) -> &PiecewiseTable {
        self.table.as_ref().expect("piecewise kinds always carry a table")
    }
}

/// JSON form of a belief: `{"kind": "uniform", "params": {"aL": 1.0, "aH": 2.0}}`,
/// or `{"kind": "piecewise", "knots": [[x, F], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BeliefSpec {
    Uniform { params: UniformParams },
    Exponential { params: RateParams },
    #[serde(alias = "beta")]
    BetaOneLambda { params: RateParams },
    Pareto { params: ParetoParams },
    TwoIntervalUniform { params: TwoIntervalParams },
    #[serde(alias = "piecewise_linear")]
    Piecewise { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    #[serde(rename = "aL")]
    pub low: f64,
    #[serde(rename = "aH")]
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoParams {
    #[serde(rename = "aL")]
    pub scale: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoIntervalParams {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl TryFrom<BeliefSpec> for DemandBelief {
    type Error = BeliefError;

    fn try_from(spec: BeliefSpec) -> Result<Self, Self::Error> {
        match spec {
            BeliefSpec::Uniform { params } => DemandBelief::uniform(params.low, params.high),
            BeliefSpec::Exponential { params } => DemandBelief::exponential(params.lambda),
            BeliefSpec::BetaOneLambda { params } => DemandBelief::beta_one_lambda(params.lambda),
            BeliefSpec::Pareto { params } => DemandBelief::pareto(params.scale, params.k),
            BeliefSpec::TwoIntervalUniform { params } => {
                DemandBelief::two_interval_uniform(params.a1, params.b1, params.a2, params.b2)
            }
            BeliefSpec::Piecewise { knots } => {
                DemandBelief::piecewise_linear(knots.into_iter().map(|[x, f]| (x, f)).collect())
            }
        }
    }
}

impl From<DemandBelief> for BeliefSpec {
    fn from(belief: DemandBelief) -> Self {
        match belief.kind {
            BeliefKind::Uniform { low, high } => BeliefSpec::Uniform { params: UniformParams { low, high } },
            BeliefKind::Exponential { rate } => BeliefSpec::Exponential { params: RateParams { lambda: rate } },
            BeliefKind::BetaOneLambda { lambda } => BeliefSpec::BetaOneLambda { params: RateParams { lambda } },
            BeliefKind::Pareto { scale, shape } => BeliefSpec::Pareto { params: ParetoParams { scale, k: shape } },
            BeliefKind::TwoIntervalUniform { a1, b1, a2, b2 } => {
                BeliefSpec::TwoIntervalUniform { params: TwoIntervalParams { a1, b1, a2, b2 } }
            }
            BeliefKind::PiecewiseLinearCdf { knots } => {
                BeliefSpec::Piecewise { knots: knots.into_iter().map(|(x, f)| [x, f]).collect() }
            }
        }
    }
}
