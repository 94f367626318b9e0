#![allow(dead_code)]

use cournot_core::distributions::DemandBelief;
use proptest::prelude::*;

pub fn uniform() -> impl Strategy<Value = DemandBelief> {
    (0.0..5.0f64, 0.1..5.0f64).prop_map(|(lo, w)| DemandBelief::uniform(lo, lo + w).unwrap())
}

pub fn exponential() -> impl Strategy<Value = DemandBelief> {
    (0.2..5.0f64).prop_map(|l| DemandBelief::exponential(l).unwrap())
}

pub fn beta() -> impl Strategy<Value = DemandBelief> {
    (0.5..20.0f64).prop_map(|l| DemandBelief::beta_one_lambda(l).unwrap())
}

pub fn pareto() -> impl Strategy<Value = DemandBelief> {
    (0.5..3.0f64, 1.2..6.0f64).prop_map(|(s, k)| DemandBelief::pareto(s, k).unwrap())
}

pub fn two_interval() -> impl Strategy<Value = DemandBelief> {
    (0.0..2.0f64, 0.1..2.0f64, 0.0..2.0f64, 0.1..2.0f64)
        .prop_map(|(a1, w1, gap, w2)| DemandBelief::two_interval_uniform(a1, a1 + w1, a1 + w1 + gap, a1 + w1 + gap + w2).unwrap())
}

pub fn piecewise() -> impl Strategy<Value = DemandBelief> {
    (0.0..2.0f64, prop::collection::vec((0.1..2.0f64, 0.05..1.0f64), 1..6)).prop_map(|(x0, segs)| {
        let total: f64 = segs.iter().map(|s| s.1).sum();
        let mut knots = vec![(x0, 0.0)];
        let (mut x, mut f) = (x0, 0.0);
        for (i, (dx, w)) in segs.iter().enumerate() {
            x += dx;
            f = if i + 1 == segs.len() { 1.0 } else { (f + w / total).min(1.0) };
            knots.push((x, f));
        }
        DemandBelief::piecewise_linear(knots).unwrap()
    })
}

/// Pareto tails thin enough for a finite fourth moment, so sample standard
/// errors are themselves consistent.
pub fn light_pareto() -> impl Strategy<Value = DemandBelief> {
    (0.5..3.0f64, 4.2..8.0f64).prop_map(|(s, k)| DemandBelief::pareto(s, k).unwrap())
}

/// Every built-in kind with a finite-variance payoff under sampling.
pub fn sampleable_belief() -> impl Strategy<Value = DemandBelief> {
    prop_oneof![uniform(), exponential(), beta(), light_pareto(), two_interval(), piecewise()]
}

/// Every built-in kind.
pub fn any_belief() -> impl Strategy<Value = DemandBelief> {
    prop_oneof![uniform(), exponential(), beta(), pareto(), two_interval(), piecewise()]
}

/// Kinds that are DMRL for every parameter value.
pub fn dmrl_belief() -> impl Strategy<Value = DemandBelief> {
    prop_oneof![uniform(), exponential(), beta()]
}

/// A point inside the support, placed by probability level.
pub fn interior(belief: &DemandBelief, u: f64) -> f64 {
    belief.quantile(0.001 + 0.998 * u)
}
