//! Supplier's optimal margin when the demand intercept is known.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::second_stage::{self, check_non_negative, MarketError, MarketParams};

/// Slack used when comparing α against branch thresholds.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplierRegime {
    /// No margin earns anything; every price `w >= c` is optimal.
    Indifferent,
    R31,
    R21,
    R11,
    /// Identical retailers: `r* = ½(α - (n+1)T - c)`.
    Symmetric,
}

impl SupplierRegime {
    pub fn label(&self) -> &'static str {
        match self {
            SupplierRegime::Indifferent => "indifferent",
            SupplierRegime::R31 => "r31",
            SupplierRegime::R21 => "r21",
            SupplierRegime::R11 => "r11",
            SupplierRegime::Symmetric => "symmetric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierSolution {
    pub alpha: f64,
    /// Optimal margin; `0` is the canonical representative when indifferent.
    pub r_star: f64,
    pub w_star: f64,
    pub regime: SupplierRegime,
    pub payoff: f64,
    /// Any non-negative margin is optimal (payoff identically zero).
    pub any_margin: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl SupplierSolution {
    fn indifferent(alpha: f64, c: f64) -> Self {
        Self {
            alpha,
            r_star: 0.0,
            w_star: c,
            regime: SupplierRegime::Indifferent,
            payoff: 0.0,
            any_margin: true,
            diagnostics: BTreeMap::new(),
        }
    }
}

/// `r · (total order at w = r + c)` with retailers in equilibrium.
pub fn supplier_payoff_on_path(r: f64, alpha: f64, params: &MarketParams) -> Result<f64, MarketError> {
    check_non_negative("r", r)?;
    let outcome = second_stage::equilibrium(alpha, r + params.c, params)?;
    Ok(r * outcome.total_order())
}

/// Two identical retailers of capacity `cap`.
pub fn optimal_margin_symmetric(alpha: f64, cap: f64, c: f64) -> Result<SupplierSolution, MarketError> {
    optimal_margin_n(alpha, cap, c, 2)
}

/// `n` identical retailers of capacity `cap`.
pub fn optimal_margin_n(alpha: f64, cap: f64, c: f64, n: u32) -> Result<SupplierSolution, MarketError> {
    check_non_negative("alpha", alpha)?;
    let params = MarketParams::identical(cap, c, n)?;
    let k = (n + 1) as f64;
    let excess = alpha - k * cap - c;
    if excess <= 0.0 {
        return Ok(SupplierSolution::indifferent(alpha, c));
    }
    let r = 0.5 * excess;
    let payoff = n as f64 / k * r * (excess - r);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("threshold".to_string(), k * cap + c);
    diagnostics.insert("payoff_on_path".to_string(), supplier_payoff_on_path(r, alpha, &params)?);
    Ok(SupplierSolution {
        alpha,
        r_star: r,
        w_star: c + r,
        regime: SupplierRegime::Symmetric,
        payoff,
        any_margin: false,
        diagnostics,
    })
}

/// Candidate margins of the piecewise-quadratic supplier payoff.
fn branch_margin(regime: SupplierRegime, alpha: f64, big: f64, small: f64, c: f64) -> f64 {
    let r = match regime {
        SupplierRegime::R31 => 0.25 * (alpha - 2.0 * c - 3.0 * small),
        SupplierRegime::R21 => 0.5 * (alpha - c - big - 2.0 * small),
        SupplierRegime::R11 => 0.5 * (alpha - c - 1.5 * (big + small)),
        SupplierRegime::Indifferent | SupplierRegime::Symmetric => 0.0,
    };
    r.max(0.0)
}

/// α-thresholds separating the supplier's branches, with the branch active
/// above each one. Case A holds when `0 < D` and `c <= D`.
pub fn branch_thresholds(params: &MarketParams) -> (char, Vec<(f64, SupplierRegime)>) {
    let (big, small, _) = params.ordered();
    let c = params.c;
    let gap = big - small;
    let delta = params.delta();
    let top = 3.0 * small + 2.0 * delta + c;
    if gap > 0.0 && c <= gap {
        let sqrt3 = 3f64.sqrt();
        (
            'A',
            vec![
                (3.0 * small + 2.0 * c, SupplierRegime::R31),
                (3.0 * small + delta - 0.5 * (sqrt3 - 1.0) * c, SupplierRegime::R21),
                (top, SupplierRegime::R11),
            ],
        )
    } else {
        (
            'B',
            vec![(big + 2.0 * small + c, SupplierRegime::R21), (top, SupplierRegime::R11)],
        )
    }
}

/// Subgame-perfect margin for arbitrary capacities. At an exact threshold
/// both neighbouring branches are priced on the equilibrium path and the
/// better one wins, ties going to the lower branch.
pub fn optimal_margin_general(alpha: f64, params: &MarketParams) -> Result<SupplierSolution, MarketError> {
    check_non_negative("alpha", alpha)?;
    params.validate()?;
    if params.n > 2 {
        return optimal_margin_n(alpha, params.t1, params.c, params.n);
    }
    let (big, small, _) = params.ordered();
    let c = params.c;
    let (case, thresholds) = branch_thresholds(params);

    if alpha <= thresholds[0].0 + THRESHOLD_SLACK {
        let mut sol = SupplierSolution::indifferent(alpha, c);
        sol.diagnostics.insert("case_a".into(), f64::from(u8::from(case == 'A')));
        return Ok(sol);
    }
    let mut idx = thresholds
        .iter()
        .rposition(|&(th, _)| alpha > th + THRESHOLD_SLACK)
        .unwrap_or(0);
    // coinciding thresholds (D = 0) leave the later branch's interval empty
    while idx > 0 && thresholds[idx].0 - thresholds[idx - 1].0 <= THRESHOLD_SLACK {
        idx -= 1;
    }
    let mut regime = thresholds[idx].1;
    let mut r = branch_margin(regime, alpha, big, small, c);
    let mut payoff = supplier_payoff_on_path(r, alpha, params)?;

    // at a tie with the next threshold, price the upper branch too
    if let Some(&(th, upper)) = thresholds.get(idx + 1) {
        if (alpha - th).abs() <= THRESHOLD_SLACK {
            let r_up = branch_margin(upper, alpha, big, small, c);
            let p_up = supplier_payoff_on_path(r_up, alpha, params)?;
            if p_up > payoff + THRESHOLD_SLACK {
                regime = upper;
                r = r_up;
                payoff = p_up;
            }
        }
    }

    if payoff <= 0.0 {
        return Ok(SupplierSolution::indifferent(alpha, c));
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("case_a".into(), f64::from(u8::from(case == 'A')));
    for (i, &(th, _)) in thresholds.iter().enumerate() {
        diagnostics.insert(format!("threshold_{i}"), th);
    }
    Ok(SupplierSolution {
        alpha,
        r_star: r,
        w_star: c + r,
        regime,
        payoff,
        any_margin: false,
        diagnostics,
    })
}
