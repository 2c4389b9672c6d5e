//! Market parameters, the discrete price grid and the loyal/strategic demand model.
//!
//! Each manufacturer keeps `d_bar - alpha * p` loyal customers at price `p`. Of the
//! `alpha * (p_i + p_j)` customers lost by the two manufacturers, a fraction `eps`
//! still wants the product; this strategic mass picks a manufacturer through a
//! mean-field game whose equilibrium split is computed here.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// All model constants shared by the two symmetric manufacturers and the supplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Market potential of each manufacturer.
    pub d_bar: f64,
    /// Price sensitivity of the loyal base.
    pub alpha: f64,
    /// Essentialness factor: share of lost customers that still want the product.
    pub eps: f64,
    /// QoS trade-off weight of strategic customers.
    pub omega: f64,
    /// QoS intercept.
    pub h: f64,
    /// Manufacturer per-unit production cost.
    pub c_m: f64,
    /// Manufacturer fixed operating cost.
    pub o_m: f64,
    /// Supplier per-unit procurement cost.
    pub c_s: f64,
    /// Supplier fixed operating cost.
    pub o_s: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            d_bar: 8.0,
            alpha: 0.5,
            eps: 0.8,
            omega: 0.0,
            h: 0.0,
            c_m: 2.0,
            o_m: 2.0,
            c_s: 0.01,
            o_s: 0.01,
        }
    }
}

impl MarketParams {
    /// Checks every parameter invariant, including the market-potential
    /// condition `d_bar > alpha (c_s + c_m) - 2 sqrt(alpha o_m)`.
    pub fn validate(self) -> Result<Self, ParamError> {
        let finite = [
            ("d_bar", self.d_bar),
            ("alpha", self.alpha),
            ("eps", self.eps),
            ("omega", self.omega),
            ("h", self.h),
            ("c_m", self.c_m),
            ("o_m", self.o_m),
            ("c_s", self.c_s),
            ("o_s", self.o_s),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ParamError::NotFinite(name));
        }
        if self.d_bar <= 0.0 {
            return Err(ParamError::NonPositive("d_bar"));
        }
        if self.alpha <= 0.0 {
            return Err(ParamError::NonPositive("alpha"));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(ParamError::EpsOutOfRange(self.eps));
        }
        if self.omega < 0.0 {
            return Err(ParamError::Negative("omega"));
        }
        for (name, v) in [("c_m", self.c_m), ("o_m", self.o_m), ("c_s", self.c_s), ("o_s", self.o_s)] {
            if v < 0.0 {
                return Err(ParamError::Negative(name));
            }
        }
        let floor = self.alpha * (self.c_s + self.c_m) - 2.0 * (self.alpha * self.o_m).sqrt();
        if self.d_bar <= floor {
            return Err(ParamError::A1Violated { d_bar: self.d_bar, floor });
        }
        Ok(self)
    }

    /// `alpha (1 - eps)`: the effective slope of demand once the strategic mass is counted.
    pub fn net_slope(&self) -> f64 {
        self.alpha * (1.0 - self.eps)
    }

    /// `(1 - alpha omega) / (2 omega)`, the price weight in the general-QoS demand.
    pub fn gamma(&self) -> Result<f64, ParamError> {
        if self.omega == 0.0 {
            return Err(ParamError::OmegaZero);
        }
        Ok((1.0 - self.alpha * self.omega) / (2.0 * self.omega))
    }

    /// Highest price at which any manufacturer can still attract demand
    /// (the monopoly demand `d_bar (1 + eps) - alpha (1 - eps) p` hits zero).
    pub fn demand_ceiling(&self) -> f64 {
        self.d_bar * (1.0 + self.eps) / self.net_slope()
    }
}

/// An action of a manufacturer: a grid price index, or staying out of the market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Price(u32),
    NoOperate,
}

impl Action {
    pub fn index(self) -> Option<u32> {
        match self {
            Action::Price(l) => Some(l),
            Action::NoOperate => None,
        }
    }

    pub fn is_operating(self) -> bool {
        matches!(self, Action::Price(_))
    }
}

/// Prices `{0, delta, 2 delta, ..., max_index * delta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    delta: f64,
    max_index: u32,
}

impl PriceGrid {
    /// Builds the grid with the smallest truncation index that still covers
    /// every price with positive demand, plus one step.
    pub fn for_market(params: &MarketParams, delta: f64) -> Result<Self, ParamError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(ParamError::NonPositive("delta"));
        }
        let cover = params.demand_ceiling() / delta + 1.0;
        if cover > u32::MAX as f64 - 2.0 {
            return Err(ParamError::GridTooLarge(cover));
        }
        Ok(Self { delta, max_index: cover.ceil() as u32 })
    }

    /// Builds a grid with an explicit truncation index, checking it is large enough.
    pub fn with_max_index(params: &MarketParams, delta: f64, max_index: u32) -> Result<Self, ParamError> {
        let min = Self::for_market(params, delta)?;
        if max_index < min.max_index {
            return Err(ParamError::GridTooCoarse { max_index, required: min.max_index });
        }
        Ok(Self { delta, max_index })
    }

    /// A grid with no coverage check, for formula-level helpers on arbitrary grids.
    pub fn unchecked(delta: f64, max_index: u32) -> Self {
        Self { delta, max_index }
    }

    /// Whether the grid reaches past every price that can carry demand.
    pub fn covers(&self, params: &MarketParams) -> bool {
        self.max_index as f64 * self.delta >= params.demand_ceiling() + self.delta * (1.0 - 1e-12)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn max_index(&self) -> u32 {
        self.max_index
    }

    /// Number of price points on the grid.
    pub fn len(&self) -> usize {
        self.max_index as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn price(&self, index: u32) -> f64 {
        index as f64 * self.delta
    }

    pub fn action_price(&self, action: Action) -> Option<f64> {
        action.index().map(|l| self.price(l))
    }

    /// Every action: all grid prices in ascending order, then `NoOperate`.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..=self.max_index).map(Action::Price).chain(std::iter::once(Action::NoOperate))
    }
}

/// Which way the strategic customers went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCase {
    AllToI,
    AllToJ,
    Interior,
    /// Zero strategic mass; the split carries no demand and is reported as one half.
    Degenerate,
}

/// Equilibrium division of strategic customers between manufacturers `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSplit {
    pub mu_i: f64,
    pub mu_j: f64,
    pub case: SplitCase,
}

impl MeanFieldSplit {
    fn new(mu_i: f64, case: SplitCase) -> Self {
        Self { mu_i, mu_j: 1.0 - mu_i, case }
    }
}

/// Mean-field split of strategic customers when they weigh both price and QoS.
pub fn mean_field_split_general(params: &MarketParams, p_i: f64, p_j: f64) -> Result<MeanFieldSplit, ParamError> {
    if params.omega == 0.0 {
        return Err(ParamError::OmegaZero);
    }
    let aw = params.alpha * params.omega;
    let gap = (p_i - p_j) * (1.0 - aw);
    let pull = (p_i + p_j) * aw * params.eps;
    if gap > pull {
        return Ok(MeanFieldSplit::new(0.0, SplitCase::AllToJ));
    }
    if gap < -pull {
        return Ok(MeanFieldSplit::new(1.0, SplitCase::AllToI));
    }
    if pull == 0.0 {
        return Ok(MeanFieldSplit::new(0.5, SplitCase::Degenerate));
    }
    let mu = (0.5 - gap / (2.0 * pull)).clamp(0.0, 1.0);
    Ok(MeanFieldSplit::new(mu, SplitCase::Interior))
}

/// Split when customers only look at price: the cheaper manufacturer takes
/// everything, ties share equally.
pub fn mean_field_split_price_only(p_i: f64, p_j: f64) -> MeanFieldSplit {
    if p_i < p_j {
        MeanFieldSplit::new(1.0, SplitCase::AllToI)
    } else if p_i > p_j {
        MeanFieldSplit::new(0.0, SplitCase::AllToJ)
    } else {
        MeanFieldSplit::new(0.5, SplitCase::Interior)
    }
}

/// Utility of a strategic customer choosing manufacturer `a` (0 = i, 1 = j)
/// under population split `mu_i`; higher is better.
///
/// The QoS is `eta(n) = h - n` evaluated at the chosen manufacturer's total base.
pub fn customer_utility(params: &MarketParams, p_i: f64, p_j: f64, mu_i: f64, choose_i: bool) -> f64 {
    let strategic = params.eps * params.alpha * (p_i + p_j);
    let (price, share) = if choose_i { (p_i, mu_i) } else { (p_j, 1.0 - mu_i) };
    let base = share * strategic + params.d_bar - params.alpha * price;
    -price + params.omega * (params.h - base)
}

/// Demand of manufacturer `i` in the price-only model. `p_j = None` means the
/// rival does not operate and `i` serves as a monopolist.
pub fn demand(params: &MarketParams, p_i: f64, p_j: Option<f64>) -> f64 {
    let MarketParams { d_bar, alpha, eps, .. } = *params;
    match p_j {
        None => (d_bar * (1.0 + eps) - alpha * (1.0 - eps) * p_i).max(0.0),
        Some(p_j) => {
            let mu = mean_field_split_price_only(p_i, p_j).mu_i;
            (d_bar - alpha * p_i + eps * alpha * mu * (p_i + p_j)).max(0.0)
        }
    }
}

/// Demand of manufacturer `i` on grid actions; zero when `i` does not operate.
pub fn demand_on_grid(params: &MarketParams, grid: &PriceGrid, a_i: Action, a_j: Action) -> f64 {
    let Some(l_i) = a_i.index() else {
        return 0.0;
    };
    let p_i = grid.price(l_i);
    match a_j {
        Action::NoOperate => demand(params, p_i, None),
        Action::Price(l_j) => {
            // compare indices so ties are exact
            let mu = match l_i.cmp(&l_j) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
            let p_j = grid.price(l_j);
            (params.d_bar - params.alpha * p_i + params.eps * params.alpha * mu * (p_i + p_j)).max(0.0)
        }
    }
}

/// General-QoS demand of manufacturer `i`, reproducing the three-branch
/// closed form with `gamma = (1 - alpha omega) / (2 omega)` as written.
/// The monopoly line is `d_bar (1 + eps) - alpha p_i`, floored at zero.
pub fn demand_general(params: &MarketParams, p_i: f64, p_j: Option<f64>) -> Result<f64, ParamError> {
    let MarketParams { d_bar, alpha, eps, .. } = *params;
    let Some(p_j) = p_j else {
        return Ok((d_bar * (1.0 + eps) - alpha * p_i).max(0.0));
    };
    let gamma = params.gamma()?;
    let shift = (p_i - p_j) * gamma;
    let band = 2.0 * (p_i + p_j) * alpha * eps;
    let strategic = eps * alpha * (p_i + p_j);
    let d = if shift > band {
        d_bar - alpha * p_i
    } else if shift < -band {
        d_bar - alpha * p_i + strategic
    } else {
        d_bar - alpha * p_i + strategic - shift
    };
    Ok(d.max(0.0))
}

/// Demand of manufacturer `i` when strategic customers split according to the
/// general mean-field equilibrium.
pub fn demand_mean_field(params: &MarketParams, p_i: f64, p_j: Option<f64>) -> Result<f64, ParamError> {
    match p_j {
        None => Ok(demand(params, p_i, None)),
        Some(p_j) => {
            let split = mean_field_split_general(params, p_i, p_j)?;
            let strategic = params.eps * params.alpha * (p_i + p_j);
            Ok((params.d_bar - params.alpha * p_i + split.mu_i * strategic).max(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_market() -> MarketParams {
        MarketParams::default()
    }

    #[test]
    fn default_params_validate() {
        assert!(reference_market().validate().is_ok());
    }

    #[test]
    fn a1_violation_detected() {
        let p = MarketParams { d_bar: 0.01, alpha: 2.0, c_m: 2.0, o_m: 0.0, ..reference_market() };
        assert!(matches!(p.validate(), Err(ParamError::A1Violated { .. })));
        // 4.02 - 4 = 0.02 < 0.5 so this one is fine
        let ok = MarketParams { d_bar: 0.5, alpha: 2.0, c_m: 2.0, o_m: 2.0, ..reference_market() };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn eps_one_rejected() {
        let p = MarketParams { eps: 1.0, ..reference_market() };
        assert_eq!(p.validate(), Err(ParamError::EpsOutOfRange(1.0)));
        let p = MarketParams { eps: -0.1, ..reference_market() };
        assert!(matches!(p.validate(), Err(ParamError::EpsOutOfRange(_))));
    }

    #[test]
    fn negative_cost_rejected() {
        let p = MarketParams { o_s: -1.0, ..reference_market() };
        assert_eq!(p.validate(), Err(ParamError::Negative("o_s")));
        let p = MarketParams { alpha: 0.0, ..reference_market() };
        assert_eq!(p.validate(), Err(ParamError::NonPositive("alpha")));
    }

    #[test]
    fn grid_covers_demand_ceiling() {
        let p = reference_market();
        let g = PriceGrid::for_market(&p, 4.0).unwrap();
        assert!(g.covers(&p));
        assert!(g.max_index() as f64 * 4.0 >= 144.0 + 4.0);
        assert!(PriceGrid::with_max_index(&p, 4.0, 10).is_err());
        assert_eq!(g.actions().count(), g.len() + 1);
    }

    #[test]
    fn price_only_split() {
        assert_eq!(mean_field_split_price_only(4.0, 6.0).mu_i, 1.0);
        assert_eq!(mean_field_split_price_only(6.0, 6.0).mu_i, 0.5);
        assert_eq!(mean_field_split_price_only(6.0, 4.0).mu_i, 0.0);
    }

    #[test]
    fn general_split_cases() {
        let p = MarketParams { omega: 0.5, ..reference_market() };
        let s = mean_field_split_general(&p, 5.0, 5.0).unwrap();
        assert_eq!(s.mu_i, 0.5);
        assert_eq!(s.case, SplitCase::Interior);
        let s = mean_field_split_general(&p, 0.0, 0.0).unwrap();
        assert_eq!((s.mu_i, s.case), (0.5, SplitCase::Degenerate));
        // (p_i - p_j)(1 - a w) = 10 * 0.75 = 7.5 > (p_i + p_j) a w eps = 12 * 0.25 * 0.8 = 2.4
        let s = mean_field_split_general(&p, 11.0, 1.0).unwrap();
        assert_eq!((s.mu_i, s.case), (0.0, SplitCase::AllToJ));
        let s = mean_field_split_general(&p, 1.0, 11.0).unwrap();
        assert_eq!((s.mu_i, s.case), (1.0, SplitCase::AllToI));
        assert_eq!(mean_field_split_general(&reference_market(), 1.0, 2.0), Err(ParamError::OmegaZero));
    }

    #[test]
    fn split_with_alpha_omega_one() {
        let p = MarketParams { omega: 2.0, ..reference_market() };
        let s = mean_field_split_general(&p, 3.0, 9.0).unwrap();
        assert_eq!(s.mu_i, 0.5);
    }

    #[test]
    fn demand_examples() {
        let p = reference_market();
        assert!((demand(&p, 4.0, Some(6.0)) - 10.0).abs() < 1e-12);
        assert!((demand(&p, 6.0, Some(6.0)) - 7.4).abs() < 1e-12);
        let p0 = MarketParams { eps: 0.0, ..reference_market() };
        assert!((demand(&p0, 4.0, None) - 6.0).abs() < 1e-12);
        assert_eq!(demand(&p, 1000.0, Some(900.0)), 0.0);
    }

    #[test]
    fn grid_demand_matches_price_demand() {
        let p = reference_market();
        let g = PriceGrid::unchecked(2.0, 100);
        for (a, b) in [(2u32, 3u32), (3, 3), (3, 2)] {
            let on_grid = demand_on_grid(&p, &g, Action::Price(a), Action::Price(b));
            let direct = demand(&p, g.price(a), Some(g.price(b)));
            assert!((on_grid - direct).abs() < 1e-12);
        }
        assert_eq!(demand_on_grid(&p, &g, Action::NoOperate, Action::Price(1)), 0.0);
    }

    #[test]
    fn general_demand_branches() {
        let p = MarketParams { omega: 0.5, ..reference_market() };
        assert!((demand_general(&p, 4.0, None).unwrap() - 12.4).abs() < 1e-12);
        let q = MarketParams { omega: 0.1, ..reference_market() };
        // gamma = 4.75: (10 - 1) * 4.75 = 42.75 > 2 * 11 * 0.5 * 0.8 = 8.8
        assert!((demand_general(&q, 10.0, Some(1.0)).unwrap() - 3.0).abs() < 1e-12);
        assert!((demand_general(&q, 1.0, Some(10.0)).unwrap() - 11.9).abs() < 1e-12);
        let sym = demand_general(&p, 6.0, Some(6.0)).unwrap();
        assert!((sym - (8.0 - 3.0 + 0.4 * 12.0)).abs() < 1e-12);
        assert!(demand_general(&reference_market(), 1.0, Some(2.0)).is_err());
    }

    #[test]
    fn mean_field_demand_reduces_to_half_split_at_equal_prices() {
        let p = MarketParams { omega: 0.3, ..reference_market() };
        let d = demand_mean_field(&p, 6.0, Some(6.0)).unwrap();
        assert!((d - demand(&p, 6.0, Some(6.0))).abs() < 1e-12);
    }
}
