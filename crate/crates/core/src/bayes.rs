//! Supplier's problem when only a belief about α is available: the expected
//! payoff, its derivative, and the equilibrium margin as the fixed point
//! `r = m(r + (n+1)T + c)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DemandBelief, DmrlGrid};
use crate::second_stage::{check_non_negative, MarketError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    /// `r_H <= 0`: no margin earns anything and every price is optimal.
    #[error("trivial market: r_H = {r_high} <= 0, every margin is optimal")]
    Trivial { r_high: f64 },
    /// The expected payoff keeps increasing past the search horizon.
    #[error("no optimal margin: expected payoff still increasing at r = {horizon:e} ({last_payoff:e} > {previous_payoff:e})")]
    NoMaximizer {
        horizon: f64,
        previous_payoff: f64,
        last_payoff: f64,
    },
    #[error("r = {r} outside the open interval (0, {r_high})")]
    Domain { r: f64, r_high: f64 },
    #[error("belief is not DMRL")]
    NotDmrl,
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Belief plus the common capacity, cost and retailer count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesProblem {
    pub belief: DemandBelief,
    #[serde(rename = "T")]
    pub capacity: f64,
    pub c: f64,
    pub n: u32,
}

impl BayesProblem {
    pub fn new(belief: DemandBelief, capacity: f64, c: f64, n: u32) -> Result<Self, BayesError> {
        check_non_negative("T", capacity)?;
        check_non_negative("c", c)?;
        if n < 2 {
            return Err(MarketError::TooFewRetailers(n).into());
        }
        Ok(Self { belief, capacity, c, n })
    }

    /// `(n+1)T + c`: the demand level below which nothing is ordered at `r = 0`.
    pub fn shift(&self) -> f64 {
        (self.n as f64 + 1.0) * self.capacity + self.c
    }

    pub fn r_low(&self) -> f64 {
        self.belief.support_low() - self.shift()
    }

    pub fn r_high(&self) -> f64 {
        self.belief.support_high() - self.shift()
    }

    pub fn is_trivial(&self) -> bool {
        self.r_high() <= 0.0
    }

    fn share(&self) -> f64 {
        self.n as f64 / (self.n as f64 + 1.0)
    }

    /// `g(r) = m(r + (n+1)T + c) - r`; its zeros are the candidate margins.
    pub fn fixed_point_gap(&self, r: f64) -> f64 {
        self.belief.mrl(r + self.shift()) - r
    }

    /// `(n/(n+1)) r E(α - (n+1)T - c - r)⁺`.
    pub fn expected_payoff(&self, r: f64) -> f64 {
        self.share() * r * self.belief.partial_expectation(self.shift() + r)
    }

    /// `(n/(n+1)) (m(x) - r)(1 - F(x))` at `x = r + (n+1)T + c`, for `0 < r < r_H`.
    pub fn payoff_derivative(&self, r: f64) -> Result<f64, BayesError> {
        let r_high = self.r_high();
        if !(r > 0.0 && r < r_high) {
            return Err(BayesError::Domain { r, r_high });
        }
        let x = r + self.shift();
        Ok(self.share() * (self.belief.mrl(x) - r) * self.belief.survival(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointBranch {
    /// `r* = ½(E α - (n+1)T - c)`, every demand realization leads to a sale.
    ExplicitLowDemandSpread,
    InteriorFixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Bisection,
    GridScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub r_star: f64,
    pub w_star: f64,
    /// `|r* - m(r* + (n+1)T + c)|`.
    pub residual: f64,
    pub branch: FixedPointBranch,
    pub unique: bool,
    pub method: SolveMethod,
    pub iterations: u32,
    pub expected_payoff: f64,
    pub dmrl: bool,
    /// Local maximizers found by the scan (one for the DMRL paths).
    pub candidates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute width at which bisection stops (scaled by `max(1, |r|)`).
    pub bracket_tol: f64,
    pub scan_points: usize,
    /// Right end of the scan grid for unbounded support: `quantile(1 - tail_mass)`.
    pub tail_mass: f64,
    /// Bracket doublings before giving up; the last bracket is `2^max_doublings` times the first.
    pub max_doublings: u32,
    pub dmrl_grid: DmrlGrid,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bracket_tol: 1e-12,
            scan_points: 10_000,
            tail_mass: 1e-8,
            max_doublings: 60,
            dmrl_grid: DmrlGrid::default(),
        }
    }
}

/// Bisection on a bracket with `g(lo) > 0 >= g(hi)`.
fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> (f64, u32) {
    let mut iterations = 0;
    while hi - lo > tol * hi.abs().max(1.0) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mid = 0.5 * (lo + hi);
    let best = [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| g(*a).abs().total_cmp(&g(*b).abs()))
        .unwrap();
    (best, iterations)
}

/// Doubles the right end from `start` until `g` turns non-positive. Returns the
/// last bracket `(lo, hi)` with `g(hi) <= 0`, or the divergence error.
fn expand_bracket(problem: &BayesProblem, start: f64, cfg: &SolverConfig) -> Result<(f64, f64), BayesError> {
    let mut lo = start;
    let mut hi = start;
    for _ in 0..=cfg.max_doublings {
        if problem.fixed_point_gap(hi) <= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(BayesError::NoMaximizer {
        horizon: lo,
        previous_payoff: problem.expected_payoff(0.5 * lo),
        last_payoff: problem.expected_payoff(lo),
    })
}

pub fn solve_equilibrium(problem: &BayesProblem) -> Result<FixedPointResult, BayesError> {
    solve_equilibrium_with(problem, &SolverConfig::default())
}

pub fn solve_equilibrium_with(problem: &BayesProblem, cfg: &SolverConfig) -> Result<FixedPointResult, BayesError> {
    let r_high = problem.r_high();
    if r_high <= 0.0 {
        return Err(BayesError::Trivial { r_high });
    }
    let belief = &problem.belief;
    let dmrl = belief.is_dmrl_with(&cfg.dmrl_grid).is_dmrl();
    let finish = |r: f64, branch, method, unique, iterations, candidates: Vec<f64>| FixedPointResult {
        r_star: r,
        w_star: problem.c + r,
        residual: problem.fixed_point_gap(r).abs(),
        branch,
        unique,
        method,
        iterations,
        expected_payoff: problem.expected_payoff(r),
        dmrl,
        candidates,
    };

    if dmrl {
        let r_low = problem.r_low();
        if belief.mean() - belief.support_low() <= r_low {
            let r = 0.5 * (belief.mean() - problem.shift());
            return Ok(finish(r, FixedPointBranch::ExplicitLowDemandSpread, SolveMethod::ClosedForm, true, 0, vec![r]));
        }
        let lo = r_low.max(0.0);
        let (lo, hi) = if r_high.is_finite() {
            (lo, r_high)
        } else {
            let (a, b) = expand_bracket(problem, lo + 1.0, cfg)?;
            (if a == b { lo } else { a }, b)
        };
        let (r, iterations) = bisect(|r| problem.fixed_point_gap(r), lo, hi, cfg.bracket_tol);
        return Ok(finish(r, FixedPointBranch::InteriorFixedPoint, SolveMethod::Bisection, true, iterations, vec![r]));
    }

    // No DMRL: every sign change of g from + to - is a local maximizer;
    // compare their payoffs directly.
    let scan_top = if r_high.is_finite() {
        r_high
    } else {
        (belief.quantile(1.0 - cfg.tail_mass) - problem.shift()).max(1.0)
    };
    let points = cfg.scan_points.max(2);
    let grid: Vec<f64> = (0..points).map(|i| scan_top * i as f64 / (points - 1) as f64).collect();
    let gaps: Vec<f64> = grid.iter().map(|&r| problem.fixed_point_gap(r)).collect();
    let mut candidates = Vec::new();
    let mut iterations = 0;
    for i in 0..points - 1 {
        if gaps[i] > 0.0 && gaps[i + 1] <= 0.0 {
            let (r, it) = bisect(|r| problem.fixed_point_gap(r), grid[i], grid[i + 1], cfg.bracket_tol);
            candidates.push(r);
            iterations += it;
        }
    }
    if gaps[points - 1] > 0.0 {
        if r_high.is_finite() {
            // g(r_H) = -r_H < 0, so the last cell holds a crossing
            let (r, it) = bisect(|r| problem.fixed_point_gap(r), scan_top, r_high, cfg.bracket_tol);
            candidates.push(r);
            iterations += it;
        } else {
            let (lo, hi) = expand_bracket(problem, scan_top, cfg)?;
            let (r, it) = bisect(|r| problem.fixed_point_gap(r), lo, hi, cfg.bracket_tol);
            candidates.push(r);
            iterations += it;
        }
    }
    let best = candidates
        .iter()
        .copied()
        .max_by(|a, b| problem.expected_payoff(*a).total_cmp(&problem.expected_payoff(*b)))
        .ok_or(BayesError::NoMaximizer {
            horizon: scan_top,
            previous_payoff: problem.expected_payoff(grid[points - 2]),
            last_payoff: problem.expected_payoff(scan_top),
        })?;
    let unique = candidates.len() == 1;
    Ok(finish(best, FixedPointBranch::InteriorFixedPoint, SolveMethod::GridScan, unique, iterations, candidates))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StaticsParam {
    #[serde(rename = "T")]
    Capacity,
    #[serde(rename = "c")]
    Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticsRow {
    pub param: f64,
    pub solution: Result<FixedPointResult, BayesError>,
}

impl StaticsRow {
    pub fn r_star(&self) -> Option<f64> {
        self.solution.as_ref().ok().map(|s| s.r_star)
    }

    pub fn w_star(&self) -> Option<f64> {
        self.solution.as_ref().ok().map(|s| s.w_star)
    }
}

/// Solutions across a grid of capacities or costs, everything else held fixed.
pub fn comparative_statics(
    problem: &BayesProblem,
    vary: StaticsParam,
    grid: &[f64],
) -> Result<Vec<StaticsRow>, BayesError> {
    if !problem.belief.is_dmrl().is_dmrl() {
        return Err(BayesError::NotDmrl);
    }
    Ok(grid
        .iter()
        .map(|&value| {
            let mut p = problem.clone();
            match vary {
                StaticsParam::Capacity => p.capacity = value,
                StaticsParam::Cost => p.c = value,
            }
            let solution = BayesProblem::new(p.belief.clone(), p.capacity, p.c, p.n).and_then(|p| solve_equilibrium(&p));
            StaticsRow { param: value, solution }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem(belief: DemandBelief, t: f64, c: f64, n: u32) -> BayesProblem {
        BayesProblem::new(belief, t, c, n).unwrap()
    }

    #[test]
    fn expected_payoff_examples() {
        let p = problem(DemandBelief::exponential(1.0).unwrap(), 0.0, 0.0, 2);
        assert_eq!(p.expected_payoff(0.0), 0.0);
        assert_abs_diff_eq!(p.expected_payoff(1.0), 2.0 / 3.0 * (-1.0f64).exp(), epsilon = 1e-15);
        let u = problem(DemandBelief::uniform(1.0, 2.0).unwrap(), 0.0, 0.0, 2);
        assert_eq!(u.expected_payoff(2.0), 0.0);
        assert_eq!(u.expected_payoff(3.0), 0.0);
        // MRL form of the same payoff
        let x = 0.6;
        assert_abs_diff_eq!(
            u.expected_payoff(x),
            2.0 / 3.0 * x * u.belief.mrl(x) * u.belief.survival(x),
            epsilon = 1e-15
        );
    }

    #[test]
    fn derivative_examples() {
        let u = problem(DemandBelief::uniform(0.0, 1.0).unwrap(), 0.0, 0.0, 2);
        assert_abs_diff_eq!(u.payoff_derivative(0.2).unwrap(), 2.0 / 3.0 * 0.2 * 0.8, epsilon = 1e-15);
        let h = 1e-6;
        let fd = (u.expected_payoff(0.2 + h) - u.expected_payoff(0.2 - h)) / (2.0 * h);
        assert_abs_diff_eq!(fd, 0.32 / 3.0, epsilon = 1e-8);
        assert!(u.payoff_derivative(1e-9).unwrap() > 0.0);
        assert!(matches!(u.payoff_derivative(0.0), Err(BayesError::Domain { .. })));
        assert!(matches!(u.payoff_derivative(1.0), Err(BayesError::Domain { .. })));
        let s = solve_equilibrium(&u).unwrap();
        assert_abs_diff_eq!(u.payoff_derivative(s.r_star).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_branch() {
        let s = solve_equilibrium(&problem(DemandBelief::uniform(1.0, 2.0).unwrap(), 0.0, 0.0, 2)).unwrap();
        assert_eq!(s.branch, FixedPointBranch::ExplicitLowDemandSpread);
        assert_eq!(s.method, SolveMethod::ClosedForm);
        assert_eq!(s.r_star, 0.75);
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn interior_examples() {
        let s = solve_equilibrium(&problem(DemandBelief::uniform(0.0, 1.0).unwrap(), 0.0, 0.0, 2)).unwrap();
        assert_abs_diff_eq!(s.r_star, 1.0 / 3.0, epsilon = 1e-11);
        assert_eq!(s.method, SolveMethod::Bisection);
        for (lambda, t, c) in [(0.5, 0.0, 0.0), (2.0, 1.0, 2.0), (4.0, 0.3, 0.1)] {
            let s = solve_equilibrium(&problem(DemandBelief::exponential(lambda).unwrap(), t, c, 2)).unwrap();
            assert_abs_diff_eq!(s.r_star, 1.0 / lambda, epsilon = 1e-10);
            assert!(s.residual <= 1e-9);
        }
        let s = solve_equilibrium(&problem(DemandBelief::beta_one_lambda(3.0).unwrap(), 0.0, 0.0, 2)).unwrap();
        assert_abs_diff_eq!(s.r_star, 0.2, epsilon = 1e-11);
    }

    #[test]
    fn non_dmrl_examples() {
        let s = solve_equilibrium(&problem(DemandBelief::pareto(1.0, 3.0).unwrap(), 0.0, 0.0, 2)).unwrap();
        assert_eq!(s.method, SolveMethod::GridScan);
        assert!(s.unique);
        assert_abs_diff_eq!(s.r_star, 0.75, epsilon = 1e-9);

        let err = solve_equilibrium(&problem(DemandBelief::pareto(1.0, 1.5).unwrap(), 0.0, 0.0, 2)).unwrap_err();
        match err {
            BayesError::NoMaximizer { previous_payoff, last_payoff, .. } => assert!(last_payoff > previous_payoff),
            other => panic!("unexpected {other:?}"),
        }

        // on (1, 2): m(r) = ((3-r)² + 2) / (2(3-r)); the root of m(r) = r is r = 2 - 1/√3
        let two = problem(DemandBelief::two_interval_uniform(1.0, 2.0, 3.0, 4.0).unwrap(), 0.0, 0.0, 2);
        let s = solve_equilibrium(&two).unwrap();
        assert!(!s.dmrl && s.unique);
        assert_abs_diff_eq!(s.r_star, 2.0 - 1.0 / 3f64.sqrt(), epsilon = 1e-10);
        assert!(s.residual <= 1e-9);
    }

    #[test]
    fn trivial_market() {
        let p = problem(DemandBelief::uniform(0.0, 1.0).unwrap(), 0.5, 0.0, 2);
        assert!(p.is_trivial());
        assert_eq!(solve_equilibrium(&p).unwrap_err(), BayesError::Trivial { r_high: -0.5 });
    }

    #[test]
    fn statics_examples() {
        let e = problem(DemandBelief::exponential(2.0).unwrap(), 0.0, 0.0, 2);
        for row in comparative_statics(&e, StaticsParam::Capacity, &[0.0, 1.0, 5.0]).unwrap() {
            assert_abs_diff_eq!(row.r_star().unwrap(), 0.5, epsilon = 1e-10);
        }
        let u = problem(DemandBelief::uniform(0.0, 1.0).unwrap(), 0.0, 0.0, 2);
        let rows = comparative_statics(&u, StaticsParam::Capacity, &[0.0, 0.05, 0.1]).unwrap();
        let r: Vec<f64> = rows.iter().map(|row| row.r_star().unwrap()).collect();
        assert!(r[0] >= r[1] - 1e-12 && r[1] >= r[2] - 1e-12, "{r:?}");
        let rows = comparative_statics(&u, StaticsParam::Cost, &[0.0, 0.2, 0.4]).unwrap();
        let w: Vec<f64> = rows.iter().map(|row| row.w_star().unwrap()).collect();
        assert!(w[0] <= w[1] && w[1] <= w[2], "{w:?}");
        // a trivial point is reported, not fatal
        let rows = comparative_statics(&u, StaticsParam::Cost, &[0.5, 1.5]).unwrap();
        assert!(rows[0].solution.is_ok());
        assert!(matches!(rows[1].solution, Err(BayesError::Trivial { .. })));

        let pareto = problem(DemandBelief::pareto(1.0, 3.0).unwrap(), 0.0, 0.0, 2);
        assert_eq!(comparative_statics(&pareto, StaticsParam::Cost, &[0.0]).unwrap_err(), BayesError::NotDmrl);
    }
}
