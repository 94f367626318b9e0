use cournot_core::first_stage::{branch_thresholds, optimal_margin_general, supplier_payoff_on_path, SupplierRegime};
use cournot_core::oracle::{verify_nash, OracleConfig};
use cournot_core::second_stage::{equilibrium_general, MarketParams, Regime, RetailerOutcome};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = MarketParams> {
    (0.0..5.0f64, 0.0..5.0f64, 0.0..3.0f64).prop_map(|(t1, t2, c)| MarketParams::new(t1, t2, c).unwrap())
}

fn strategies_gap(a: &RetailerOutcome, b: &RetailerOutcome) -> f64 {
    [a.t1 - b.t1, a.q1 - b.q1, a.t2 - b.t2, a.q2 - b.q2].iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn retailer_outcome_is_nash(p in params(), alpha in 0.0..20.0f64, w in 0.0..10.0f64) {
        let out = equilibrium_general(alpha, w, &p).unwrap();
        let check = verify_nash(alpha, w, &p, &out, &OracleConfig::default().with_tolerance(1e-8));
        prop_assert!(check.ok, "gain {} by {:?}", check.max_gain, check.worst_deviation);
    }

    #[test]
    fn own_capacity_is_used_before_ordering(p in params(), alpha in 0.0..20.0f64, w in 0.0..10.0f64) {
        let o = equilibrium_general(alpha, w, &p).unwrap();
        if o.q1 > 0.0 { prop_assert_eq!(o.t1, p.t1); }
        if o.q2 > 0.0 { prop_assert_eq!(o.t2, p.t2); }
        prop_assert!(o.t1 <= p.t1 && o.t2 <= p.t2 && o.q1 >= 0.0 && o.q2 >= 0.0);
    }

    #[test]
    fn gamma11_total_is_cournot_duopoly(p in params(), alpha in 0.0..30.0f64, w in 0.0..5.0f64) {
        let o = equilibrium_general(alpha, w, &p).unwrap();
        if o.regime == Regime::Gamma11 {
            prop_assert!((o.q_total - 2.0 * (alpha - w) / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn regimes_form_intervals_with_one_arrangement(
        t2 in 0.1..3.0f64, extra in 0.01..3.0f64, w in 0.0..3.0f64,
    ) {
        let p = MarketParams::new(t2 + extra, t2, 0.0).unwrap();
        let top = 3.0 * (p.t1 + p.t2) + 3.0 * w + 1.0;
        let mut blocks: Vec<Regime> = Vec::new();
        for i in 0..=4000 {
            let r = equilibrium_general(top * i as f64 / 4000.0, w, &p).unwrap().regime;
            if blocks.last() != Some(&r) {
                prop_assert!(!blocks.contains(&r), "{r:?} reappears in {blocks:?}");
                blocks.push(r);
            }
        }
        prop_assert!(!(blocks.contains(&Regime::Gamma31) && blocks.contains(&Regime::Gamma22)), "{blocks:?}");
    }

    #[test]
    fn strategies_continuous_at_cuts(p in params(), w in 0.0..3.0f64) {
        let top = 3.0 * (p.t1 + p.t2) + 3.0 * w + 1.0;
        let at = |a: f64| equilibrium_general(a, w, &p).unwrap();
        let mut prev = at(0.0);
        for i in 1..=2000 {
            let next = at(top * i as f64 / 2000.0);
            if next.regime != prev.regime {
                let (mut lo, mut hi) = (prev.alpha, next.alpha);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi { break; }
                    if at(mid).regime == prev.regime { lo = mid } else { hi = mid }
                }
                let gap = strategies_gap(&at(lo), &at(hi));
                prop_assert!(gap <= 1e-12, "cut near {lo}: {gap:e}");
            }
            prev = next;
        }
    }

    #[test]
    fn supplier_margin_beats_grid(p in params(), alpha in 0.0..20.0f64) {
        let sol = optimal_margin_general(alpha, &p).unwrap();
        let top = alpha - p.c;
        prop_assume!(top > 0.0);
        let best = (0..=10_000)
            .map(|i| supplier_payoff_on_path(top * i as f64 / 10_000.0, alpha, &p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(sol.payoff >= best - 1e-6, "{} < {best}", sol.payoff);
        let on_path = supplier_payoff_on_path(sol.r_star, alpha, &p).unwrap();
        prop_assert!((on_path - sol.payoff).abs() <= 1e-9 * (1.0 + on_path));
    }

    #[test]
    fn supplier_payoff_envelope(p in params()) {
        let f = |a: f64| optimal_margin_general(a, &p).unwrap().payoff;
        let mut prev = f(0.0);
        for i in 1..=2000 {
            let a = 20.0 * i as f64 / 2000.0;
            let v = f(a);
            prop_assert!(v >= prev - 1e-12, "payoff falls at alpha={a}");
            prop_assert!((f(a + 1e-7) - v).abs() <= 1e-5, "payoff jumps at alpha={a}");
            prev = v;
        }
    }

    #[test]
    fn case_a_thresholds_ordered(t2 in 0.0..3.0f64, d in 0.01..3.0f64, share in 0.0..=1.0f64) {
        let p = MarketParams::new(t2 + d, t2, share * d).unwrap();
        let (case, th) = branch_thresholds(&p);
        prop_assert_eq!(case, 'A');
        prop_assert!(th.windows(2).all(|w| w[0].0 <= w[1].0), "{th:?}");
    }

    #[test]
    fn equal_capacities_reduce_to_case_b(t in 0.0..3.0f64, c in 0.0..3.0f64, over in 0.001..10.0f64) {
        let p = MarketParams::new(t, t, c).unwrap();
        prop_assert_eq!(branch_thresholds(&p).0, 'B');
        let alpha = 3.0 * t + c + over;
        let sol = optimal_margin_general(alpha, &p).unwrap();
        prop_assert_eq!(sol.regime, SupplierRegime::R21);
        prop_assert!((sol.r_star - 0.5 * over).abs() <= 1e-12);
    }
}
