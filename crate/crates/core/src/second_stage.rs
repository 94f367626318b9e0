//! Retailer (second-stage) equilibrium for an observed demand intercept α and
//! posted wholesale price w.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("`{name}` must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("retailer count must be at least 2, got {0}")]
    TooFewRetailers(u32),
    #[error("identical-retailer path requires T1 == T2 (got {t1} and {t2})")]
    AsymmetricCapacities { t1: f64, t2: f64 },
    #[error("opponents' quantity {q_other} exceeds the demand intercept {alpha}")]
    OpponentExceedsDemand { q_other: f64, alpha: f64 },
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<f64, MarketError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(MarketError::Negative { name, value })
    }
}

/// Exogenous constants of the market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    /// Supplier cost net of the retailers' production cost.
    pub c: f64,
    #[serde(default = "two")]
    pub n: u32,
}

fn two() -> u32 {
    2
}

impl MarketParams {
    pub fn new(t1: f64, t2: f64, c: f64) -> Result<Self, MarketError> {
        check_non_negative("T1", t1)?;
        check_non_negative("T2", t2)?;
        check_non_negative("c", c)?;
        Ok(Self { t1, t2, c, n: 2 })
    }

    /// `n` retailers sharing capacity `t`.
    pub fn identical(t: f64, c: f64, n: u32) -> Result<Self, MarketError> {
        if n < 2 {
            return Err(MarketError::TooFewRetailers(n));
        }
        let mut params = Self::new(t, t, c)?;
        params.n = n;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        check_non_negative("T1", self.t1)?;
        check_non_negative("T2", self.t2)?;
        check_non_negative("c", self.c)?;
        if self.n < 2 {
            return Err(MarketError::TooFewRetailers(self.n));
        }
        if self.n > 2 && self.t1 != self.t2 {
            return Err(MarketError::AsymmetricCapacities { t1: self.t1, t2: self.t2 });
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.t1 == self.t2
    }

    /// Capacities ordered so that the first is the larger; the flag reports
    /// whether a swap happened.
    pub fn ordered(&self) -> (f64, f64, bool) {
        if self.t1 >= self.t2 {
            (self.t1, self.t2, false)
        } else {
            (self.t2, self.t1, true)
        }
    }

    /// `T1 + T2`.
    pub fn total_capacity(&self) -> f64 {
        self.t1 + self.t2
    }

    /// `|T1 - T2|`.
    pub fn capacity_gap(&self) -> f64 {
        (self.t1 - self.t2).abs()
    }

    /// `(√3 + 3)/2 · D`.
    pub fn delta(&self) -> f64 {
        0.5 * (3f64.sqrt() + 3.0) * self.capacity_gap()
    }
}

/// Own production `t` (up to capacity) and order `q` from the supplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub t: f64,
    pub q: f64,
}

impl Strategy {
    pub const ZERO: Strategy = Strategy { t: 0.0, q: 0.0 };

    pub fn new(t: f64, q: f64) -> Self {
        Self { t, q }
    }

    /// Quantity released to the market.
    pub fn quantity(&self) -> f64 {
        self.t + self.q
    }
}

/// Which best-reply branches intersect at the equilibrium. The first digit is
/// the branch of the larger-capacity retailer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "G11")]
    Gamma11,
    #[serde(rename = "G21")]
    Gamma21,
    #[serde(rename = "G22")]
    Gamma22,
    #[serde(rename = "G31")]
    Gamma31,
    #[serde(rename = "G32")]
    Gamma32,
    #[serde(rename = "G33")]
    Gamma33,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Gamma11 => "G11",
            Regime::Gamma21 => "G21",
            Regime::Gamma22 => "G22",
            Regime::Gamma31 => "G31",
            Regime::Gamma32 => "G32",
            Regime::Gamma33 => "G33",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetailerOutcome {
    pub alpha: f64,
    pub w: f64,
    pub t1: f64,
    pub q1: f64,
    pub t2: f64,
    pub q2: f64,
    pub regime: Regime,
    /// Number of retailers; with `n > 2` every retailer plays `(t1, q1)`.
    pub n: u32,
    pub q_total: f64,
    pub clearing_price: f64,
    /// Capacities were supplied as `T1 < T2` and the retailers were relabelled.
    pub swapped: bool,
}

impl RetailerOutcome {
    pub fn first(&self) -> Strategy {
        Strategy::new(self.t1, self.q1)
    }

    pub fn second(&self) -> Strategy {
        Strategy::new(self.t2, self.q2)
    }

    /// Total quantity ordered from the supplier.
    pub fn total_order(&self) -> f64 {
        if self.n > 2 {
            self.n as f64 * self.q1
        } else {
            self.q1 + self.q2
        }
    }
}

/// Best reply of a retailer with capacity `cap` to opponents releasing
/// `q_other` in total.
pub fn best_reply(alpha: f64, w: f64, cap: f64, q_other: f64) -> Result<Strategy, MarketError> {
    check_non_negative("alpha", alpha)?;
    check_non_negative("w", w)?;
    check_non_negative("T", cap)?;
    check_non_negative("Q_other", q_other)?;
    if q_other > alpha {
        return Err(MarketError::OpponentExceedsDemand { q_other, alpha });
    }
    Ok(if q_other < alpha - w - 2.0 * cap {
        Strategy::new(cap, 0.5 * (alpha - w - q_other) - cap)
    } else if q_other < alpha - 2.0 * cap {
        Strategy::new(cap, 0.0)
    } else {
        Strategy::new(0.5 * (alpha - q_other), 0.0)
    })
}

/// Payoff `Q_i(α - w - Q) + w t_i` of a retailer playing `own`.
pub fn retailer_payoff(alpha: f64, w: f64, own: Strategy, q_other: f64) -> f64 {
    let qi = own.quantity();
    qi * (alpha - w - qi - q_other) + w * own.t
}

/// Unique retailer equilibrium for arbitrary capacities. At a cut point between
/// two α-intervals the row with the lower α-interval is reported; strategies
/// agree there.
pub fn equilibrium_general(alpha: f64, w: f64, params: &MarketParams) -> Result<RetailerOutcome, MarketError> {
    check_non_negative("alpha", alpha)?;
    check_non_negative("w", w)?;
    check_non_negative("T1", params.t1)?;
    check_non_negative("T2", params.t2)?;
    let (big, small, swapped) = params.ordered();
    let (regime, s1, s2) = table_row(alpha, w, big, small);
    let (s1, s2) = if swapped { (s2, s1) } else { (s1, s2) };
    let q_total = s1.quantity() + s2.quantity();
    Ok(RetailerOutcome {
        alpha,
        w,
        t1: s1.t,
        q1: s1.q,
        t2: s2.t,
        q2: s2.q,
        regime,
        n: 2,
        q_total,
        clearing_price: alpha - q_total,
        swapped,
    })
}

fn table_row(alpha: f64, w: f64, t1: f64, t2: f64) -> (Regime, Strategy, Strategy) {
    if alpha <= 3.0 * t2 {
        let x = alpha / 3.0;
        return (Regime::Gamma33, Strategy::new(x, 0.0), Strategy::new(x, 0.0));
    }
    if alpha <= (2.0 * t1 + t2).min(3.0 * t2 + 2.0 * w) {
        return (Regime::Gamma32, Strategy::new(0.5 * (alpha - t2), 0.0), Strategy::new(t2, 0.0));
    }
    if alpha > 3.0 * t2 + 2.0 * w && alpha <= 3.0 * t1 - w {
        return (
            Regime::Gamma31,
            Strategy::new((alpha + w) / 3.0, 0.0),
            Strategy::new(t2, (alpha - 2.0 * w) / 3.0 - t2),
        );
    }
    if alpha > 2.0 * t1 + t2 && alpha <= t1 + 2.0 * t2 + w {
        return (Regime::Gamma22, Strategy::new(t1, 0.0), Strategy::new(t2, 0.0));
    }
    if alpha <= 3.0 * t1 + w {
        return (
            Regime::Gamma21,
            Strategy::new(t1, 0.0),
            Strategy::new(t2, 0.5 * (alpha - w - t1) - t2),
        );
    }
    let each = (alpha - w) / 3.0;
    (Regime::Gamma11, Strategy::new(t1, each - t1), Strategy::new(t2, each - t2))
}

/// Symmetric equilibrium strategy of each of `n` retailers with capacity `cap`.
pub fn equilibrium_n_identical(alpha: f64, w: f64, cap: f64, n: u32) -> Result<Strategy, MarketError> {
    check_non_negative("alpha", alpha)?;
    check_non_negative("w", w)?;
    check_non_negative("T", cap)?;
    if n < 2 {
        return Err(MarketError::TooFewRetailers(n));
    }
    let k = (n + 1) as f64;
    Ok(Strategy::new(
        cap - ((k * cap - alpha).max(0.0)) / k,
        (alpha - k * cap - w).max(0.0) / k,
    ))
}

/// Equilibrium for `n` identical retailers packaged as an outcome. The regime
/// label uses the two-retailer naming: `G33` without binding capacity, `G22`
/// at capacity without orders, `G11` when ordering.
pub fn outcome_n_identical(alpha: f64, w: f64, cap: f64, n: u32) -> Result<RetailerOutcome, MarketError> {
    let s = equilibrium_n_identical(alpha, w, cap, n)?;
    let k = (n + 1) as f64;
    let regime = if alpha <= k * cap {
        Regime::Gamma33
    } else if alpha <= k * cap + w {
        Regime::Gamma22
    } else {
        Regime::Gamma11
    };
    let q_total = n as f64 * s.quantity();
    Ok(RetailerOutcome {
        alpha,
        w,
        t1: s.t,
        q1: s.q,
        t2: s.t,
        q2: s.q,
        regime,
        n,
        q_total,
        clearing_price: alpha - q_total,
        swapped: false,
    })
}

/// Retailer equilibrium for any validated market: the general table for two
/// retailers, the identical-retailer formula otherwise.
pub fn equilibrium(alpha: f64, w: f64, params: &MarketParams) -> Result<RetailerOutcome, MarketError> {
    params.validate()?;
    if params.n == 2 {
        equilibrium_general(alpha, w, params)
    } else {
        outcome_n_identical(alpha, w, params.t1, params.n)
    }
}
