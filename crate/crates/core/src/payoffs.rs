//! Manufacturer and supplier utilities, the floor-preferring discrete argmax and
//! the supplier-price thresholds.
//!
//! With the rival operating, a manufacturer's utility is one of three concave
//! pieces depending on whether it undercuts (`w1`), is undercut (`w2`) or
//! matches (`w3`) the rival's price; `w4` is the monopoly utility when the rival
//! stays out. All four subtract the fixed operating cost and use the effective
//! unit cost `c_m + q`.

use serde::{Deserialize, Serialize};

use crate::market::{demand_on_grid, Action, MarketParams, PriceGrid};

/// Relative tolerance for utility comparisons.
pub const REL_TOL: f64 = 1e-9;
/// Absolute tolerance used near zero.
pub const ABS_TOL: f64 = 1e-12;

/// `a >= b` up to the utility tolerance; near-ties count as ties.
pub fn weakly_geq(a: f64, b: f64) -> bool {
    a >= b - ABS_TOL.max(REL_TOL * a.abs().max(b.abs()))
}

/// `a == b` up to the utility tolerance.
pub fn approx_eq(a: f64, b: f64) -> bool {
    weakly_geq(a, b) && weakly_geq(b, a)
}

/// Per-unit cost of a manufacturer buying input at supplier price `q`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EffectiveCost(pub f64);

impl EffectiveCost {
    pub fn new(params: &MarketParams, q: f64) -> Self {
        Self(params.c_m + q)
    }
}

/// Undercutting manufacturer at `p_i` against a rival at `p_j > p_i`.
pub fn w1(params: &MarketParams, q: f64, p_i: f64, p_j: f64) -> f64 {
    let MarketParams { d_bar, alpha, eps, .. } = *params;
    let demand = (d_bar - alpha * p_i * (1.0 - eps) + eps * alpha * p_j).max(0.0);
    demand * (p_i - EffectiveCost::new(params, q).0) - params.o_m
}

/// Undercut manufacturer at `p_j`: keeps only its loyal base.
pub fn w2(params: &MarketParams, q: f64, p_j: f64) -> f64 {
    let demand = (params.d_bar - params.alpha * p_j).max(0.0);
    demand * (p_j - EffectiveCost::new(params, q).0) - params.o_m
}

/// Both manufacturers at the same price `p`, sharing the strategic mass equally.
pub fn w3(params: &MarketParams, q: f64, p: f64) -> f64 {
    let demand = (params.d_bar - params.net_slope() * p).max(0.0);
    demand * (p - EffectiveCost::new(params, q).0) - params.o_m
}

/// Lone operating manufacturer at `p`.
pub fn w4(params: &MarketParams, q: f64, p: f64) -> f64 {
    let demand = (params.d_bar * (1.0 + params.eps) - params.net_slope() * p).max(0.0);
    demand * (p - EffectiveCost::new(params, q).0) - params.o_m
}

/// Maximizer of the unclamped `w2` quadratic.
pub fn w2_relaxed_argmax(params: &MarketParams, q: f64) -> f64 {
    (params.d_bar / params.alpha + EffectiveCost::new(params, q).0) / 2.0
}

/// Maximizer of the unclamped `w3` quadratic.
pub fn w3_relaxed_argmax(params: &MarketParams, q: f64) -> f64 {
    (params.d_bar / params.net_slope() + EffectiveCost::new(params, q).0) / 2.0
}

/// Maximizer of the unclamped `w4` quadratic.
pub fn w4_relaxed_argmax(params: &MarketParams, q: f64) -> f64 {
    (params.d_bar * (1.0 + params.eps) / params.net_slope() + EffectiveCost::new(params, q).0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Who {
    I,
    J,
}

/// Joint action of both manufacturers together with the supplier's quote
/// (`None` when the supplier does not operate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub a_i: Action,
    pub a_j: Action,
    pub q: Option<f64>,
}

impl ActionProfile {
    pub fn new(a_i: Action, a_j: Action, q: f64) -> Self {
        debug_assert!(q >= 0.0);
        Self { a_i, a_j, q: Some(q) }
    }

    pub fn without_supplier(a_i: Action, a_j: Action) -> Self {
        Self { a_i, a_j, q: None }
    }

    /// The same profile seen from the other manufacturer.
    pub fn swapped(self) -> Self {
        Self { a_i: self.a_j, a_j: self.a_i, q: self.q }
    }
}

/// Utility of manufacturer `who` under `profile`, dispatched on the price order.
///
/// A manufacturer that does not operate gets exactly zero. If the supplier does
/// not operate, an operating manufacturer earns no margin and pays `o_m`.
pub fn manufacturer_utility(params: &MarketParams, grid: &PriceGrid, profile: &ActionProfile, who: Who) -> f64 {
    let (own, rival) = match who {
        Who::I => (profile.a_i, profile.a_j),
        Who::J => (profile.a_j, profile.a_i),
    };
    let Some(l_own) = own.index() else {
        return 0.0;
    };
    let Some(q) = profile.q else {
        return -params.o_m;
    };
    let p = grid.price(l_own);
    match rival {
        Action::NoOperate => w4(params, q, p),
        Action::Price(l_rival) => match l_own.cmp(&l_rival) {
            std::cmp::Ordering::Less => w1(params, q, p, grid.price(l_rival)),
            std::cmp::Ordering::Equal => w3(params, q, p),
            std::cmp::Ordering::Greater => w2(params, q, p),
        },
    }
}

/// Supplier utility: margin on everything the operating manufacturers sell,
/// minus the fixed cost; zero when the supplier does not operate.
pub fn supplier_utility_raw(params: &MarketParams, grid: &PriceGrid, profile: &ActionProfile) -> f64 {
    let Some(q) = profile.q else {
        return 0.0;
    };
    let volume = demand_on_grid(params, grid, profile.a_i, profile.a_j)
        + demand_on_grid(params, grid, profile.a_j, profile.a_i);
    volume * (q - params.c_s) - params.o_s
}

/// Grid maximizer of a unimodal `f` whose relaxed maximizer is `relaxed_argmax`:
/// the floor neighbour wins ties against the ceiling neighbour. Indices are
/// clamped to the grid.
pub fn discrete_argmax(f: impl Fn(f64) -> f64, relaxed_argmax: f64, grid: &PriceGrid) -> u32 {
    let max = grid.max_index() as f64;
    let scaled = (relaxed_argmax / grid.delta()).clamp(0.0, max);
    let lo = scaled.floor();
    let hi = scaled.ceil();
    if lo == hi {
        return lo as u32;
    }
    let (lo, hi) = (lo as u32, hi as u32);
    if f(grid.price(lo)) >= f(grid.price(hi)) {
        lo
    } else {
        hi
    }
}

/// A grid optimum: index and value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub index: u32,
    pub value: f64,
}

/// Grid maximizer of `w2` (the undercut manufacturer's best price) and its value.
pub fn l_bar(params: &MarketParams, q: f64, grid: &PriceGrid) -> GridOptimum {
    let index = discrete_argmax(|p| w2(params, q, p), w2_relaxed_argmax(params, q), grid);
    GridOptimum { index, value: w2(params, q, grid.price(index)) }
}

/// Grid maximizer of the monopoly utility `w4` and its value.
pub fn w4_star_delta(params: &MarketParams, q: f64, grid: &PriceGrid) -> GridOptimum {
    let index = discrete_argmax(|p| w4(params, q, p), w4_relaxed_argmax(params, q), grid);
    GridOptimum { index, value: w4(params, q, grid.price(index)) }
}

/// Relaxed monopoly optimum over continuous prices; reported as zero once
/// `q` exceeds [`q_bar_m`].
pub fn w4_star_relaxed(params: &MarketParams, q: f64) -> f64 {
    if q > q_bar_m(params) {
        return 0.0;
    }
    let slope = params.net_slope();
    let gap = params.d_bar * (1.0 + params.eps) - slope * EffectiveCost::new(params, q).0;
    gap * gap / (4.0 * slope) - params.o_m
}

/// Supplier price beyond which even a lone manufacturer cannot break even.
pub fn q_bar_m(params: &MarketParams) -> f64 {
    let slope = params.net_slope();
    (params.d_bar * (1.0 + params.eps) - slope * params.c_m - 2.0 * (slope * params.o_m).sqrt()) / slope
}

/// Supplier price beyond which two manufacturers at a common price cannot break even.
pub fn q_bar_s(params: &MarketParams) -> f64 {
    let slope = params.net_slope();
    (params.d_bar - slope * params.c_m - 2.0 * (slope * params.o_m).sqrt()) / slope
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_market() -> MarketParams {
        MarketParams::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn piece_examples() {
        let p = reference_market();
        assert!(close(w1(&p, 1.0, 5.0, 6.0), 17.8));
        assert!(close(w1(&p, 1.0, 3.0, 40.0), -2.0));
        // the clamp can only bind for an undercutter when eps < 1/2
        let low_eps = MarketParams { eps: 0.2, ..reference_market() };
        assert!(close(w1(&low_eps, 1.0, 100.0, 101.0), -2.0));
        assert!(close(w2(&p, 1.0, 6.0), 13.0));
        assert!(close(w2(&p, 1.0, 8.0), 18.0));
        assert!(close(w2(&p, 1.0, 3.0), -2.0));
        assert!(close(w3(&p, 1.0, 8.0), 34.0));
        assert!(close(w3(&p, 1.0, 12.0), 59.2));
        assert!(close(w3(&p, 1.0, 3.0), -2.0));
        assert!(close(w4(&p, 1.0, 6.0), 39.4));
        assert!(close(w4(&p, 1.0, 3.0), -2.0));
        let p0 = MarketParams { eps: 0.0, ..reference_market() };
        for x in [0.0, 3.5, 7.0, 20.0] {
            assert_eq!(w4(&p0, 1.0, x), w2(&p0, 1.0, x));
        }
    }

    #[test]
    fn dispatch_examples() {
        let p = reference_market();
        let g = PriceGrid::for_market(&p, 4.0).unwrap();
        let prof = ActionProfile::new(Action::Price(2), Action::Price(3), 1.0);
        assert!(close(manufacturer_utility(&p, &g, &prof, Who::I), 58.0));
        assert!(close(manufacturer_utility(&p, &g, &prof, Who::J), w2(&p, 1.0, 12.0)));
        let out = ActionProfile::new(Action::NoOperate, Action::NoOperate, 1.0);
        assert_eq!(manufacturer_utility(&p, &g, &out, Who::I), 0.0);
        assert_eq!(manufacturer_utility(&p, &g, &out, Who::J), 0.0);
        let g2 = PriceGrid::for_market(&p, 2.0).unwrap();
        let mono = ActionProfile::new(Action::Price(3), Action::NoOperate, 1.0);
        assert!(close(manufacturer_utility(&p, &g2, &mono, Who::I), 39.4));
        assert_eq!(manufacturer_utility(&p, &g2, &mono, Who::J), 0.0);
        let no_supplier = ActionProfile::without_supplier(Action::Price(3), Action::NoOperate);
        assert_eq!(manufacturer_utility(&p, &g2, &no_supplier, Who::I), -2.0);
    }

    #[test]
    fn supplier_examples() {
        let p = reference_market();
        let g = PriceGrid::for_market(&p, 4.0).unwrap();
        let out = ActionProfile::new(Action::NoOperate, Action::NoOperate, 1.0);
        assert!(close(supplier_utility_raw(&p, &g, &out), -0.01));
        let sym = ActionProfile::new(Action::Price(3), Action::Price(3), 1.0);
        assert!(close(supplier_utility_raw(&p, &g, &sym), 13.454));
        let none = ActionProfile::without_supplier(Action::Price(3), Action::Price(3));
        assert_eq!(supplier_utility_raw(&p, &g, &none), 0.0);
    }

    #[test]
    fn discrete_argmax_floor_tie_break() {
        let p = reference_market();
        let g = PriceGrid::for_market(&p, 4.0).unwrap();
        assert!(close(w2_relaxed_argmax(&p, 1.0), 9.5));
        let lb = l_bar(&p, 1.0, &g);
        assert_eq!(lb.index, 2);
        assert!(close(lb.value, 18.0));
        assert_eq!(discrete_argmax(|x| -(x - 8.0).powi(2), 8.0, &g), 2);
        assert_eq!(discrete_argmax(|x| -(x + 3.0).powi(2), -3.0, &g), 0);
        assert_eq!(discrete_argmax(|x| -(x - 1e9).powi(2), 1e9, &g), g.max_index());
        // exact tie between neighbours goes to the floor
        assert_eq!(discrete_argmax(|x| -(x - 6.0).powi(2), 6.0, &g), 1);
    }

    #[test]
    fn l_bar_converges_to_relaxed_maximizer() {
        let p = reference_market();
        let g = PriceGrid::for_market(&p, 1e-3).unwrap();
        let lb = l_bar(&p, 1.0, &g);
        assert!((g.price(lb.index) - 9.5).abs() <= 1e-3);
    }

    #[test]
    fn thresholds() {
        let p = reference_market();
        let qm = (14.4 - 0.2 - 2.0 * 0.2f64.sqrt()) / 0.1;
        let qs = (8.0 - 0.2 - 2.0 * 0.2f64.sqrt()) / 0.1;
        assert!(close(q_bar_m(&p), qm));
        assert!(close(q_bar_s(&p), qs));
        assert!((q_bar_m(&p) - 133.0557).abs() < 1e-4);
        assert!((q_bar_s(&p) - 69.0557).abs() < 1e-4);
        assert!(q_bar_s(&p) < q_bar_m(&p));
        let bare = MarketParams { o_m: 0.0, c_m: 0.0, eps: 0.0, ..reference_market() };
        assert!(close(q_bar_m(&bare), 16.0));
        assert!(close(q_bar_s(&bare), 16.0));
        let no_fixed = MarketParams { o_m: 0.0, eps: 0.0, ..reference_market() };
        assert!(close(q_bar_s(&no_fixed), (8.0 - 1.0) / 0.5));
    }

    #[test]
    fn relaxed_w4_star_vanishes_at_threshold() {
        let p = reference_market();
        assert!(w4_star_relaxed(&p, q_bar_m(&p)).abs() < 1e-9);
        assert_eq!(w4_star_relaxed(&p, q_bar_m(&p) + 1.0), 0.0);
        let fine = PriceGrid::for_market(&p, 1e-3).unwrap();
        let q = 10.0;
        assert!((w4_star_delta(&p, q, &fine).value - w4_star_relaxed(&p, q)).abs() < 1e-3);
    }

    #[test]
    fn tolerance_helpers() {
        assert!(weakly_geq(1.0, 1.0 + 1e-12));
        assert!(!weakly_geq(1.0, 1.0 + 1e-6));
        assert!(weakly_geq(0.0, 1e-13));
        assert!(approx_eq(59.2, 59.2 + 1e-10));
    }
}
