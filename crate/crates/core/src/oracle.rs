//! Brute-force checks that certify the closed forms: grid best-response
//! deviations, grid search over margins, Monte Carlo expectations and
//! adaptive quadrature.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DemandBelief;
use crate::second_stage::{MarketParams, RetailerOutcome, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub grid_points: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub tolerance_abs: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid_points: 2000, mc_samples: 1_000_000, seed: 0, tolerance_abs: 1e-6 }
    }
}

impl OracleConfig {
    pub fn with_grid(mut self, grid_points: usize) -> Self {
        self.grid_points = grid_points.max(2);
        self
    }

    pub fn with_samples(mut self, mc_samples: usize) -> Self {
        self.mc_samples = mc_samples.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tolerance(mut self, tolerance_abs: f64) -> Self {
        self.tolerance_abs = tolerance_abs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    /// 1 or 2.
    pub retailer: u8,
    pub strategy: Strategy,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashCheck {
    pub ok: bool,
    pub max_gain: f64,
    pub worst_deviation: Option<Deviation>,
}

/// Payoff `Q_i(α - Q) - w q_i`, written independently of the second-stage
/// module.
fn own_payoff(alpha: f64, w: f64, s: Strategy, others: f64) -> f64 {
    let qi = s.t + s.q;
    qi * (alpha - qi - others) - w * s.q
}

/// Points of the dominance-reduced strategy set: own production below
/// `min(α, T)` with no order, or full capacity plus an order.
fn reduced_strategies(alpha: f64, cap: f64, points: usize) -> Vec<Strategy> {
    let tmax = cap.min(alpha);
    let mut out: Vec<Strategy> =
        (0..=points).map(|i| Strategy::new(tmax * i as f64 / points as f64, 0.0)).collect();
    if cap < alpha {
        let qmax = alpha - cap;
        out.extend((1..=points).map(|i| Strategy::new(cap, qmax * i as f64 / points as f64)));
    }
    out
}

/// Largest unilateral gain any retailer can obtain by deviating to a point
/// on the grid.
pub fn verify_nash(
    alpha: f64,
    w: f64,
    params: &MarketParams,
    candidate: &RetailerOutcome,
    cfg: &OracleConfig,
) -> NashCheck {
    let n = candidate.n.max(2);
    let mut players: Vec<(u8, f64, Strategy, f64)> = Vec::new();
    if n == 2 {
        let s1 = candidate.first();
        let s2 = candidate.second();
        players.push((1, params.t1, s1, s2.t + s2.q));
        players.push((2, params.t2, s2, s1.t + s1.q));
    } else {
        // identical retailers: one representative deviator
        let s = candidate.first();
        players.push((1, params.t1, s, (n - 1) as f64 * (s.t + s.q)));
    }
    let mut max_gain = f64::NEG_INFINITY;
    let mut worst = None;
    for (idx, cap, current, others) in players {
        let base = own_payoff(alpha, w, current, others);
        for dev in reduced_strategies(alpha, cap, cfg.grid_points) {
            let gain = own_payoff(alpha, w, dev, others) - base;
            if gain > max_gain {
                max_gain = gain;
                worst = Some(Deviation { retailer: idx, strategy: dev, gain });
            }
        }
    }
    let max_gain = max_gain.max(0.0);
    NashCheck {
        ok: max_gain <= cfg.tolerance_abs,
        max_gain,
        worst_deviation: worst.filter(|d| d.gain > 0.0),
    }
}

/// Maximize `payoff` over `[r_lo, r_hi]`: uniform grid, then golden-section on
/// the two cells around the best grid point.
pub fn grid_argmax_margin<F>(payoff: F, r_lo: f64, r_hi: f64, cfg: &OracleConfig) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(r_lo < r_hi, "empty search interval [{r_lo}, {r_hi}]");
    let n = cfg.grid_points.max(2);
    let step = (r_hi - r_lo) / (n - 1) as f64;
    let at = |i: usize| if i + 1 == n { r_hi } else { r_lo + step * i as f64 };
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let v = payoff(at(i));
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = at(best_i.saturating_sub(1));
    let mut b = at((best_i + 1).min(n - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = payoff(x1);
    let mut f2 = payoff(x2);
    for _ in 0..200 {
        if b - a <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = payoff(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = payoff(x1);
        }
    }
    let (r_ref, v_ref) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if v_ref > best_v {
        (r_ref, v_ref)
    } else {
        (at(best_i), best_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 1 << 16;

/// Uniform on the open interval (0, 1) from the top 53 bits.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Monte Carlo estimate of `E[(n/(n+1)) r (α - (n+1)T - c - r)⁺]`.
///
/// α is drawn by inverse survival from its law conditional on exceeding the cut
/// `(n+1)T + c + r`, and the sample mean is scaled by the probability of the
/// cut. Far-tail configurations therefore still get a meaningful standard
/// error. Each chunk of samples draws from its own ChaCha stream, so the
/// result does not depend on the thread count.
pub fn mc_expected_payoff(
    belief: &DemandBelief,
    cap: f64,
    c: f64,
    n: u32,
    r: f64,
    cfg: &OracleConfig,
) -> McEstimate {
    let samples = cfg.mc_samples.max(1);
    let cut = (n as f64 + 1.0) * cap + c + r;
    let tail = belief.survival(cut);
    if r == 0.0 || tail == 0.0 {
        return McEstimate { estimate: 0.0, std_error: 0.0, samples };
    }
    let scale = n as f64 / (n as f64 + 1.0) * r;
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let len = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..len {
                let alpha = belief.inverse_survival(tail * open_unit(rng.next_u64()));
                let x = scale * (alpha - cut).max(0.0);
                sum += x;
                sq += x * x;
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let m = samples as f64;
    let mean = sum / m;
    let var = if samples > 1 { ((sq - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
    McEstimate { estimate: tail * mean, std_error: tail * (var / m).sqrt(), samples }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("integrand is not finite at {0}")]
    NonFinite(f64),
    #[error("adaptive quadrature did not reach the tolerance (error estimate {estimate:e})")]
    NotConverged { estimate: f64 },
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(mid));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(mid - dx), f(mid + dx));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite(mid - dx));
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite(mid + dx));
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to relative
/// tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gauss_kronrod(&f, lo, hi)?;
    let mut pieces = vec![(lo, hi, v, e)];
    for _ in 0..2000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs().max(1e-300) || err <= 1e-15 {
            return Ok(sign * total);
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _, _) = pieces.swap_remove(worst);
        let pm = 0.5 * (pa + pb);
        let (v1, e1) = gauss_kronrod(&f, pa, pm)?;
        let (v2, e2) = gauss_kronrod(&f, pm, pb)?;
        pieces.push((pa, pm, v1, e1));
        pieces.push((pm, pb, v2, e2));
    }
    let err: f64 = pieces.iter().map(|p| p.3).sum();
    Err(QuadratureError::NotConverged { estimate: err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::second_stage::{equilibrium_general, outcome_n_identical};
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_rows_pass_nash_check() {
        let cfg = OracleConfig::default();
        let p = MarketParams::new(2.0, 0.5, 0.0).unwrap();
        for alpha in [0.0, 1.0, 2.0, 3.0, 4.5, 5.5, 7.0, 12.0] {
            let o = equilibrium_general(alpha, 0.2, &p).unwrap();
            let check = verify_nash(alpha, 0.2, &p, &o, &cfg);
            assert!(check.ok, "alpha={alpha}: {check:?}");
            assert!(check.max_gain <= 1e-8);
        }
    }

    #[test]
    fn perturbed_candidate_fails() {
        let cfg = OracleConfig::default();
        let p = MarketParams::new(1.0, 1.0, 0.0).unwrap();
        let mut o = equilibrium_general(9.0, 1.0, &p).unwrap();
        o.q1 += 0.1;
        let check = verify_nash(9.0, 1.0, &p, &o, &cfg);
        assert!(!check.ok);
        // the deviation back to the best reply gains exactly 0.1² for retailer 1
        assert_abs_diff_eq!(check.max_gain, 0.01, epsilon = 1e-5);
        assert_eq!(check.worst_deviation.unwrap().retailer, 1);
    }

    #[test]
    fn zero_demand_is_trivially_nash() {
        let p = MarketParams::new(1.0, 0.5, 0.0).unwrap();
        let o = equilibrium_general(0.0, 0.3, &p).unwrap();
        let check = verify_nash(0.0, 0.3, &p, &o, &OracleConfig::default());
        assert!(check.ok);
        assert_eq!(check.max_gain, 0.0);
    }

    #[test]
    fn n_identical_nash() {
        let p = MarketParams::identical(1.0, 0.0, 4).unwrap();
        let o = outcome_n_identical(10.0, 1.0, 1.0, 4).unwrap();
        assert!(verify_nash(10.0, 1.0, &p, &o, &OracleConfig::default()).ok);
    }

    #[test]
    fn grid_argmax_quadratic() {
        let cfg = OracleConfig::default();
        let (r, v) = grid_argmax_margin(|r| r * (3.0 - r), 0.0, 3.0, &cfg);
        assert_abs_diff_eq!(r, 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 2.25, epsilon = 1e-12);
        let p = MarketParams::new(1.0, 1.0, 1.0).unwrap();
        let (r, _) = grid_argmax_margin(
            |r| crate::first_stage::supplier_payoff_on_path(r, 10.0, &p).unwrap(),
            0.0,
            9.0,
            &cfg,
        );
        assert_abs_diff_eq!(r, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_argmax_uniform_bayes_payoff() {
        let b = DemandBelief::uniform(1.0, 2.0).unwrap();
        let (r, _) = grid_argmax_margin(|r| 2.0 / 3.0 * r * b.partial_expectation(r), 0.0, 2.0, &OracleConfig::default());
        assert_abs_diff_eq!(r, 0.75, epsilon = 1e-4);
    }

    #[test]
    fn mc_examples() {
        let cfg = OracleConfig::default().with_samples(200_000).with_seed(7);
        let e = DemandBelief::exponential(1.0).unwrap();
        let z = mc_expected_payoff(&e, 0.0, 0.0, 2, 0.0, &cfg);
        assert_eq!((z.estimate, z.std_error), (0.0, 0.0));
        let est = mc_expected_payoff(&e, 0.0, 0.0, 2, 1.0, &cfg);
        let exact = 2.0 / 3.0 * (-1.0f64).exp();
        assert!((est.estimate - exact).abs() < 3.0 * est.std_error, "{est:?}");
        let u = DemandBelief::uniform(0.0, 1.0).unwrap();
        assert_eq!(mc_expected_payoff(&u, 0.0, 0.0, 2, 1.0, &cfg).estimate, 0.0);
    }

    #[test]
    fn mc_is_deterministic_given_seed() {
        let cfg = OracleConfig::default().with_samples(150_001).with_seed(42);
        let b = DemandBelief::beta_one_lambda(3.0).unwrap();
        let a = mc_expected_payoff(&b, 0.0, 0.0, 3, 0.2, &cfg);
        let c = mc_expected_payoff(&b, 0.0, 0.0, 3, 0.2, &cfg);
        assert_eq!(a.estimate.to_bits(), c.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), c.std_error.to_bits());
        let other = mc_expected_payoff(&b, 0.0, 0.0, 3, 0.2, &cfg.with_seed(43));
        assert_ne!(a.estimate.to_bits(), other.estimate.to_bits());
    }

    #[test]
    fn quadrature_basics() {
        assert_abs_diff_eq!(integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap(), 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(|x| 1.0 / x, 1.0, 10.0, 1e-12).unwrap(), 10f64.ln(), epsilon = 1e-11);
        assert_abs_diff_eq!(integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap(), 2.0 / 3.0, epsilon = 1e-9);
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-9).unwrap(), 0.0);
        assert_abs_diff_eq!(integrate(|x| x, 1.0, 0.0, 1e-12).unwrap(), -0.5, epsilon = 1e-15);
        assert!(integrate(|x| 1.0 / (1.0 - x), 0.0, 1.0, 1e-9).is_err());
    }
}
