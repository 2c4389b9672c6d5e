use proptest::prelude::*;

use pricegame::equilibria::{brute_force_nash, enumerate_nash, symmetric_ne_interval, v_of_l, Regime, Subgame};
use pricegame::market::{
    customer_utility, demand_on_grid, mean_field_split_general, mean_field_split_price_only, Action, MarketParams,
    PriceGrid,
};
use pricegame::payoffs::{
    manufacturer_utility, q_bar_m, supplier_utility_raw, w1, w2, w3, w4, ActionProfile, EffectiveCost, Who,
};
use pricegame::stackelberg::{focal_ne, supplier_utility_symmetric};

fn params() -> impl Strategy<Value = MarketParams> {
    (2.0..20.0f64, 0.1..3.0f64, 0.0..0.95f64, 0.0..5.0f64, 0.0..5.0f64)
        .prop_map(|(d_bar, alpha, eps, c_m, o_m)| MarketParams { d_bar, alpha, eps, c_m, o_m, ..MarketParams::default() })
        .prop_filter("parameter invariants", |p| p.validate().is_ok())
}

/// Parameters, a grid of 20..200 prices and a supplier price up to past the monopoly threshold.
fn game() -> impl Strategy<Value = (MarketParams, PriceGrid, f64)> {
    (params(), 20.0..200.0f64, 0.0..1.2f64).prop_map(|(p, target, qf)| {
        let grid = PriceGrid::for_market(&p, p.demand_ceiling() / target).unwrap();
        (p, grid, q_bar_m(&p).max(0.1) * qf)
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn demand_nonnegative_and_nonincreasing((p, g, _q) in game(), rival in 0u32..400, absent in any::<bool>()) {
        let a_j = if absent { Action::NoOperate } else { Action::Price(rival.min(g.max_index())) };
        let mut prev = f64::INFINITY;
        for l in 0..=g.max_index() {
            let d = demand_on_grid(&p, &g, Action::Price(l), a_j);
            prop_assert!(d >= 0.0);
            prop_assert!(d <= prev + 1e-12 * prev.abs().max(1.0), "demand rose at l={} ({} -> {})", l, prev, d);
            prev = d;
        }
    }

    #[test]
    fn price_only_split_label_symmetry(a in 0.0..100.0f64, b in 0.0..100.0f64, tie in any::<bool>()) {
        let b = if tie { a } else { b };
        prop_assert_eq!(mean_field_split_price_only(a, b).mu_i + mean_field_split_price_only(b, a).mu_i, 1.0);
    }

    #[test]
    fn qos_intercept_cancels(p in params(), omega in 0.01..2.0f64, h1 in -50.0..50.0f64, h2 in -50.0..50.0f64,
                             pi in 0.0..30.0f64, pj in 0.0..30.0f64, mu in 0.0..1.0f64) {
        let a = MarketParams { omega, h: h1, ..p };
        let b = MarketParams { omega, h: h2, ..p };
        let gap_a = customer_utility(&a, pi, pj, mu, true) - customer_utility(&a, pi, pj, mu, false);
        let gap_b = customer_utility(&b, pi, pj, mu, true) - customer_utility(&b, pi, pj, mu, false);
        prop_assert!((gap_a - gap_b).abs() <= 1e-9 * (1.0 + h1.abs() + h2.abs()));
        let split_a = mean_field_split_general(&a, pi, pj).unwrap();
        let split_b = mean_field_split_general(&b, pi, pj).unwrap();
        prop_assert_eq!(split_a, split_b);
    }

    #[test]
    fn utility_label_symmetry((p, g, q) in game(), x in 0u32..400, y in 0u32..400, xo in any::<bool>(), yo in any::<bool>()) {
        let pick = |k: u32, off: bool| if off { Action::NoOperate } else { Action::Price(k.min(g.max_index())) };
        let (a, b) = (pick(x, xo), pick(y, yo));
        let prof = ActionProfile::new(a, b, q);
        prop_assert_eq!(manufacturer_utility(&p, &g, &prof, Who::I), manufacturer_utility(&p, &g, &prof.swapped(), Who::J));
        if a == b {
            prop_assert_eq!(manufacturer_utility(&p, &g, &prof, Who::I), manufacturer_utility(&p, &g, &prof, Who::J));
        }
    }

    #[test]
    fn utility_ordering_above_cost(p in params(), q in 0.0..50.0f64, extra in 0.0..100.0f64) {
        let price = EffectiveCost::new(&p, q).0 + extra;
        prop_assert!(w4(&p, q, price) >= w3(&p, q, price));
        prop_assert!(w3(&p, q, price) >= w2(&p, q, price));
    }

    #[test]
    fn discrete_concavity_where_clamp_free((p, g, q) in game(), rival in 1u32..400) {
        let rival = rival.min(g.max_index());
        let pr = g.price(rival);
        let slope = p.net_slope();
        let tol = |a: f64, b: f64, c: f64| 1e-9 * (a.abs() + b.abs() + c.abs()).max(1.0);
        for l in 1..g.max_index() {
            let (lo, mid, hi) = (g.price(l - 1), g.price(l), g.price(l + 1));
            // each piece is checked only where its linear demand stays positive at all three points
            let checks: [(bool, &dyn Fn(f64) -> f64); 4] = [
                (p.d_bar - slope * hi + p.eps * p.alpha * pr >= 0.0 && hi < pr, &|x| w1(&p, q, x, pr)),
                (p.d_bar - p.alpha * hi >= 0.0, &|x| w2(&p, q, x)),
                (p.d_bar - slope * hi >= 0.0, &|x| w3(&p, q, x)),
                (p.d_bar * (1.0 + p.eps) - slope * hi >= 0.0, &|x| w4(&p, q, x)),
            ];
            for (active, f) in checks {
                if active {
                    let (a, b, c) = (f(lo), f(mid), f(hi));
                    prop_assert!(c - 2.0 * b + a <= tol(a, b, c));
                }
            }
        }
    }

    #[test]
    fn pruned_search_equals_exhaustive((p, g, q) in game()) {
        let bf = brute_force_nash(&p, q, &g).unwrap();
        let fast = enumerate_nash(&p, q, &g).unwrap();
        prop_assert_eq!(bf.regime, fast.regime);
        prop_assert_eq!(bf.profiles(), fast.profiles());
    }

    #[test]
    fn interval_matches_exhaustive_symmetric((p, g, q) in game()) {
        let bf = brute_force_nash(&p, q, &g).unwrap();
        let predicted = symmetric_ne_interval(&p, q, &g).map(|i| i.members).unwrap_or_default();
        prop_assert_eq!(predicted, bf.symmetric.clone());
        if bf.regime == Regime::CompleteChoking {
            prop_assert_eq!(bf.profiles(), vec![(Action::NoOperate, Action::NoOperate)]);
        }
    }

    /// In the duopoly regime the break-even lower bound never binds: the lower
    /// end is the root of the match-versus-best-alternative quadratic.
    #[test]
    fn duopoly_lower_end_is_the_alternative_root((p, g, q) in game()) {
        if let Ok(iv) = symmetric_ne_interval(&p, q, &g) {
            if let Some(root) = iv.s_duopoly {
                prop_assert_eq!(iv.s, root);
            }
        }
    }

    /// With a positive loyal-loss share, matching gains strictly over the
    /// rival's price, so no operating equilibrium has distinct prices.
    #[test]
    fn no_asymmetric_equilibria_with_positive_eps((p, g, q) in game()) {
        prop_assume!(p.eps > 0.0);
        let bf = brute_force_nash(&p, q, &g).unwrap();
        prop_assert!(bf.asymmetric.is_empty());
    }

    #[test]
    fn nash_is_mutual_best_response((p, g, q) in game()) {
        let game = Subgame::new(p, q, g).unwrap();
        for (a, b) in brute_force_nash(&p, q, &g).unwrap().profiles() {
            prop_assert!(game.best_response(b).actions.contains(&a));
            prop_assert!(game.best_response(a).actions.contains(&b));
        }
    }

    #[test]
    fn match_gain_paths_agree((p, g, q) in game(), l in 1u32..400) {
        let l = l.min(g.max_index());
        let v = v_of_l(&p, q, &g, l);
        if v.clamp_free {
            prop_assert!(close(v.direct, v.quadratic), "{} vs {}", v.direct, v.quadratic);
        }
    }

    #[test]
    fn focal_supplier_utility_matches_raw((p, g, q) in game()) {
        let f = focal_ne(&p, q, &g).unwrap();
        if f.exists {
            let raw = supplier_utility_raw(&p, &g, &ActionProfile::new(Action::Price(f.l_star), Action::Price(f.l_star), q));
            prop_assert!(close(supplier_utility_symmetric(&p, q, f.price), raw));
            let sym = brute_force_nash(&p, q, &g).unwrap().symmetric;
            prop_assert!(sym.contains(&f.l_star));
            prop_assert!(sym.iter().all(|&l| w3(&p, q, g.price(l)) <= f.w3_value + 1e-9 * f.w3_value.abs().max(1.0)));
        }
    }

    #[test]
    fn general_split_is_a_fixed_point(p in params(), omega in 0.01..3.0f64, pi in 0.0..40.0f64, pj in 0.0..40.0f64) {
        let p = MarketParams { omega, ..p };
        let s = mean_field_split_general(&p, pi, pj).unwrap();
        let ui = customer_utility(&p, pi, pj, s.mu_i, true);
        let uj = customer_utility(&p, pi, pj, s.mu_i, false);
        let tol = 1e-9 * ui.abs().max(uj.abs()).max(1.0);
        if s.mu_i > 0.0 && pi + pj > 0.0 {
            prop_assert!(ui >= uj - tol);
        }
        if s.mu_j > 0.0 && pi + pj > 0.0 {
            prop_assert!(uj >= ui - tol);
        }
    }
}

#[test]
fn exact_tie_asymmetric_pair_at_zero_eps() {
    // eps = 0 removes the strategic segment, so an undercut gains nothing and
    // distinct-price pairs can survive; they sit one step above the W2 optimum,
    // not one step below it
    let p = MarketParams { d_bar: 10.0, alpha: 1.0, eps: 0.0, c_m: 0.0, o_m: 0.0, ..MarketParams::default() };
    let g = PriceGrid::for_market(&p, 2.0).unwrap();
    let bf = brute_force_nash(&p, 0.0, &g).unwrap();
    assert!(!bf.asymmetric.is_empty());
    let lb = pricegame::payoffs::l_bar(&p, 0.0, &g).index;
    for &(a, b) in &bf.asymmetric {
        let (x, y) = (a.index().unwrap(), b.index().unwrap());
        assert_eq!(x.max(y), lb + 1, "{a:?} {b:?}");
        assert_eq!(x.min(y), lb);
    }
    // the closed form only reports verified pairs, and its candidate is not among them
    assert!(pricegame::equilibria::asymmetric_ne(&p, 0.0, &g).is_empty());
}
