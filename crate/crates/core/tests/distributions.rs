mod common;

use common::{any_belief, dmrl_belief, interior};
use cournot_core::distributions::DemandBelief;
use cournot_core::oracle::integrate;
use proptest::prelude::*;

proptest! {
    #[test]
    fn mrl_times_survival_is_partial_expectation(b in any_belief(), u in 0.0..1.0f64, below in 0.0..2.0f64) {
        for t in [interior(&b, u), b.support_low() - below] {
            let pe = b.partial_expectation(t);
            let lhs = b.mrl(t) * b.survival(t);
            prop_assert!((lhs - pe).abs() <= 1e-10 * pe.abs().max(1e-300), "t={t}: {lhs} vs {pe}");
        }
    }

    #[test]
    fn mrl_dominates_mean_shortfall(b in any_belief(), u in 0.0..1.0f64) {
        let t = interior(&b, u);
        let f = b.cdf(t);
        prop_assume!(f > 1e-6 && f < 1.0);
        let m = b.mrl(t);
        prop_assert!(m >= (b.mean() - t).max(0.0));
        // strict once a visible share of mass lies below t
        if f > 1e-3 {
            prop_assert!(m > b.mean() - t, "m({t}) = {m}, mean = {}", b.mean());
        }
    }

    #[test]
    fn cdf_inverts_quantile(b in any_belief()) {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let back = b.cdf(b.quantile(p));
            prop_assert!((back - p).abs() <= 1e-9, "p={p}: {back}");
        }
    }

    #[test]
    fn survival_inverts_inverse_survival(b in any_belief(), exp10 in -30.0..0.0f64) {
        let s = 10f64.powf(exp10);
        let t = b.inverse_survival(s);
        // t is only known to an ulp, and S can be steep there (Beta with λ < 1 near 1)
        let (below, above) = (b.survival(t.next_up()), b.survival(t.next_down()));
        let slack = 1e-9 * s;
        prop_assert!(below - slack <= s && s <= above + slack, "s={s}: t={t}, S in [{below}, {above}]");
    }

    #[test]
    fn survival_rebuilt_from_mrl(b in dmrl_belief()) {
        // S(t) = m(aL)/m(t) · exp(-∫_{aL}^t du/m(u))
        let lo = b.support_low();
        let m0 = b.mrl(lo);
        for i in 1..=20 {
            let t = b.quantile(0.999 * i as f64 / 20.0);
            let integral = integrate(|x| 1.0 / b.mrl(x), lo, t, 1e-10).unwrap();
            let rebuilt = m0 / b.mrl(t) * (-integral).exp();
            prop_assert!((rebuilt - b.survival(t)).abs() <= 1e-6, "t={t}: {rebuilt} vs {}", b.survival(t));
        }
    }

    #[test]
    fn density_matches_survival_slope(b in any_belief(), u in 0.0..1.0f64) {
        let t = interior(&b, u);
        let h = 1e-6 * (1.0 + t.abs());
        let (s_lo, s_hi) = (b.survival(t - h), b.survival(t + h));
        let fd = (s_lo - s_hi) / (2.0 * h);
        let (d_lo, d_hi) = (b.density(t - h), b.density(t + h));
        // at a kink the difference quotient lies between the one-sided densities
        let (lo, hi) = (d_lo.min(d_hi), d_lo.max(d_hi));
        prop_assert!(fd >= lo - 1e-5 * (1.0 + hi) && fd <= hi + 1e-5 * (1.0 + hi), "t={t}: {fd} not in [{lo}, {hi}]");
    }

    #[test]
    fn serde_round_trip(b in any_belief()) {
        let text = serde_json::to_string(&b).unwrap();
        let back: DemandBelief = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, b);
    }
}

#[test]
fn verdicts_by_family() {
    assert!(DemandBelief::uniform(0.0, 1.0).unwrap().is_dmrl().is_dmrl());
    assert!(DemandBelief::exponential(2.0).unwrap().is_dmrl().is_dmrl());
    assert!(!DemandBelief::pareto(1.0, 3.0).unwrap().is_dmrl().is_dmrl());
    // mass pushed into a far second interval makes m rise across the gap
    let b = DemandBelief::two_interval_uniform(0.0, 1.0, 5.0, 5.1).unwrap();
    assert!(!b.is_dmrl().is_dmrl());
}
