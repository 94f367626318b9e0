//! Probability that a mutually beneficial trade fails because the supplier
//! prices without seeing α.

use serde::{Deserialize, Serialize};

use crate::bayes::{BayesProblem, FixedPointResult};
use crate::oracle::{integrate, QuadratureError};

/// `1 - e⁻¹`, the largest possible conditional no-trade probability under DMRL.
pub fn dmrl_bound() -> f64 {
    -(-1.0f64).exp_m1()
}

/// Slack allowed on top of the bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyReport {
    /// P(V ∩ U): α would trade under complete information but not at `r*`.
    pub p_joint: f64,
    /// P(V | U); `None` when no demand level exceeds the complete-information threshold.
    pub p_conditional: Option<f64>,
    /// `(1 - e⁻¹) - p_conditional`.
    pub bound_slack: Option<f64>,
    /// `(n+1)T + c`.
    pub threshold_complete: f64,
    /// `r* + (n+1)T + c`.
    pub threshold_incomplete: f64,
}

pub fn inefficiency(problem: &BayesProblem, solution: &FixedPointResult) -> InefficiencyReport {
    let belief = &problem.belief;
    let lo = problem.shift();
    let hi = solution.r_star + lo;
    // survival differences keep full relative precision deep in the tail
    let s_lo = belief.survival(lo);
    let s_hi = belief.survival(hi);
    let p_joint = (s_lo - s_hi).max(0.0);
    let p_conditional = (s_lo > 0.0).then(|| (1.0 - s_hi / s_lo).clamp(0.0, 1.0));
    InefficiencyReport {
        p_joint,
        p_conditional,
        bound_slack: p_conditional.map(|p| dmrl_bound() - p),
        threshold_complete: lo,
        threshold_incomplete: hi,
    }
}

/// P(V | U) rebuilt from the mean residual life alone:
/// `1 - m(a)/m(b) · exp(-∫_a^b du / m(u))` with `a = (n+1)T + c`, `b = a + r*`.
pub fn mrl_form_conditional(problem: &BayesProblem, solution: &FixedPointResult) -> Result<f64, QuadratureError> {
    let a = problem.shift();
    let b = a + solution.r_star;
    if b <= a {
        return Ok(0.0);
    }
    let m = |u: f64| problem.belief.mrl(u);
    let (ma, mb) = (m(a), m(b));
    if !(ma > 0.0 && mb > 0.0) {
        return Err(QuadratureError::NonFinite(if ma > 0.0 { b } else { a }));
    }
    // split at the support floor where m has a kink
    let floor = problem.belief.support_low();
    let inv = |u: f64| 1.0 / m(u);
    let exponent = if a < floor && floor < b {
        integrate(inv, a, floor, 1e-9)? + integrate(inv, floor, b, 1e-9)?
    } else {
        integrate(inv, a, b, 1e-9)?
    };
    Ok(1.0 - ma / mb * (-exponent).exp())
}

/// `true` unless the belief is DMRL and the report breaks the `1 - e⁻¹` bound.
pub fn bound_check(report: &InefficiencyReport, dmrl: bool) -> bool {
    !dmrl || report.p_conditional.is_none_or(|p| p <= dmrl_bound() + BOUND_SLACK)
}
