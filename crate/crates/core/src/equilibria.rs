//! Pure Nash equilibria of the manufacturer game at a fixed supplier price.
//!
//! The exhaustive enumerator in [`brute_force_nash`] is the ground truth. The
//! closed forms ([`symmetric_ne_interval`], [`asymmetric_ne`]) are predictions
//! that the test suites compare against it.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HypothesisViolated, ParamError};
use crate::market::{Action, MarketParams, PriceGrid};
use crate::payoffs::{self, w1, w2, w3, w4, weakly_geq, EffectiveCost, GridOptimum};

/// Supplier-price regime of the manufacturer game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Even a monopolist makes a loss at every grid price.
    CompleteChoking,
    /// A lone manufacturer survives, but the undercut one never breaks even.
    PartialChoking,
    /// The undercut manufacturer can still break even.
    Duopoly,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::CompleteChoking => "complete_choking",
            Regime::PartialChoking => "partial_choking",
            Regime::Duopoly => "duopoly",
        }
    }
}

pub fn classify_regime(params: &MarketParams, q: f64, grid: &PriceGrid) -> Regime {
    if payoffs::w4_star_delta(params, q, grid).value < 0.0 {
        Regime::CompleteChoking
    } else if payoffs::l_bar(params, q, grid).value >= 0.0 {
        Regime::Duopoly
    } else {
        Regime::PartialChoking
    }
}

/// The manufacturer game at supplier price `q` on a fixed price grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgame {
    pub params: MarketParams,
    pub q: f64,
    pub grid: PriceGrid,
}

impl Subgame {
    /// Fails with `GridTooCoarse` if the grid truncation could clip a best response.
    pub fn new(params: MarketParams, q: f64, grid: PriceGrid) -> Result<Self, ParamError> {
        if !grid.covers(&params) {
            let required = PriceGrid::for_market(&params, grid.delta())?.max_index();
            return Err(ParamError::GridTooCoarse { max_index: grid.max_index(), required });
        }
        Ok(Self { params, q, grid })
    }

    /// Convenience constructor using the minimal covering grid for `delta`.
    pub fn with_delta(params: MarketParams, q: f64, delta: f64) -> Result<Self, ParamError> {
        let grid = PriceGrid::for_market(&params, delta)?;
        Ok(Self { params, q, grid })
    }

    pub fn regime(&self) -> Regime {
        classify_regime(&self.params, self.q, &self.grid)
    }

    pub fn l_bar(&self) -> GridOptimum {
        payoffs::l_bar(&self.params, self.q, &self.grid)
    }

    /// Utility of a manufacturer playing `own` against `rival`.
    pub fn utility(&self, own: Action, rival: Action) -> f64 {
        let p = &self.params;
        let Some(l) = own.index() else {
            return 0.0;
        };
        let price = self.grid.price(l);
        match rival {
            Action::NoOperate => w4(p, self.q, price),
            Action::Price(k) => match l.cmp(&k) {
                Ordering::Less => w1(p, self.q, price, self.grid.price(k)),
                Ordering::Equal => w3(p, self.q, price),
                Ordering::Greater => w2(p, self.q, price),
            },
        }
    }

    /// Utilities of every own action (grid prices then `NoOperate`) against `rival`.
    fn utility_row(&self, rival: Action) -> Vec<f64> {
        self.grid.actions().map(|own| self.utility(own, rival)).collect()
    }

    /// All own actions maximizing utility against `rival`, ties included.
    pub fn best_response(&self, rival: Action) -> BestResponse {
        let row = self.utility_row(rival);
        let value = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let actions: Vec<Action> = self
            .grid
            .actions()
            .zip(&row)
            .filter(|(_, &u)| weakly_geq(u, value))
            .map(|(a, _)| a)
            .collect();
        let candidates = self.candidate_set(rival);
        let within_candidates = candidates.as_ref().map(|c| actions.iter().all(|a| c.contains(a)));
        BestResponse { actions, value, candidates, within_candidates }
    }

    /// Whether `own` is a best response to `rival`.
    pub fn is_best_response(&self, own: Action, rival: Action) -> bool {
        let u = self.utility(own, rival);
        self.grid.actions().all(|other| weakly_geq(u, self.utility(other, rival)))
    }

    pub fn is_nash(&self, a_i: Action, a_j: Action) -> bool {
        self.is_best_response(a_i, a_j) && self.is_best_response(a_j, a_i)
    }

    /// The small set the best response to a grid price is predicted to lie in:
    /// one step below, a match, `l_bar` (duopoly only) or staying out.
    pub fn candidate_set(&self, rival: Action) -> Option<Vec<Action>> {
        let l = rival.index()?;
        let mut set = vec![Action::NoOperate];
        match self.regime() {
            Regime::CompleteChoking => {}
            regime => {
                if l > 0 {
                    set.push(Action::Price(l - 1));
                }
                set.push(Action::Price(l));
                if regime == Regime::Duopoly {
                    set.push(Action::Price(self.l_bar().index));
                }
            }
        }
        set.sort();
        set.dedup();
        Some(set)
    }
}

/// Result of a best-response computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// Maximizing actions in grid order, `NoOperate` last.
    pub actions: Vec<Action>,
    pub value: f64,
    /// Predicted candidate set; `None` against a non-operating rival.
    pub candidates: Option<Vec<Action>>,
    /// Whether every maximizer lies in the predicted candidate set.
    pub within_candidates: Option<bool>,
}

pub fn best_response(params: &MarketParams, q: f64, grid: &PriceGrid, opponent: Action) -> BestResponse {
    Subgame { params: *params, q, grid: *grid }.best_response(opponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    ClosedForm,
    BruteForce,
    /// Exhaustive search that discards profiles failing a necessary
    /// single-deviation test before checking full best responses.
    PrunedSearch,
}

/// Classified pure equilibria of one manufacturer game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub regime: Regime,
    /// Grid indices `l` with `(l, l)` an equilibrium, ascending.
    pub symmetric: Vec<u32>,
    /// Operating equilibria with different prices, as `(a_i, a_j)`; mirror pairs.
    pub asymmetric: Vec<(Action, Action)>,
    /// Equilibria where exactly one manufacturer operates.
    pub monopoly: Vec<(Action, Action)>,
    /// Whether both staying out is an equilibrium.
    pub shutdown_ne: bool,
    pub source: Source,
}

impl EquilibriumSet {
    /// Equilibria in which both manufacturers operate.
    pub fn operating_count(&self) -> usize {
        self.symmetric.len() + self.asymmetric.len()
    }

    pub fn total_count(&self) -> usize {
        self.operating_count() + self.monopoly.len() + usize::from(self.shutdown_ne)
    }

    /// Every equilibrium profile in deterministic order.
    pub fn profiles(&self) -> Vec<(Action, Action)> {
        let mut all: Vec<(Action, Action)> = self
            .symmetric
            .iter()
            .map(|&l| (Action::Price(l), Action::Price(l)))
            .chain(self.asymmetric.iter().copied())
            .chain(self.monopoly.iter().copied())
            .collect();
        if self.shutdown_ne {
            all.push((Action::NoOperate, Action::NoOperate));
        }
        all.sort();
        all
    }
}

/// Enumerates every pure profile of the game and keeps those where each
/// action is a (tie-inclusive) best response to the other.
///
/// For every rival action the full row of own utilities is evaluated, so no
/// structure of the utility functions is assumed.
pub fn brute_force_nash(params: &MarketParams, q: f64, grid: &PriceGrid) -> Result<EquilibriumSet, ParamError> {
    let game = Subgame::new(*params, q, *grid)?;
    let actions: Vec<Action> = grid.actions().collect();

    // best-response sets as sorted slot lists, one per rival action
    let responses: Vec<Vec<usize>> = actions
        .par_iter()
        .map(|&rival| {
            let row = game.utility_row(rival);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().enumerate().filter(|(_, &u)| weakly_geq(u, best)).map(|(s, _)| s).collect()
        })
        .collect();

    let mut symmetric = Vec::new();
    let mut asymmetric = Vec::new();
    let mut monopoly = Vec::new();
    let mut shutdown_ne = false;
    for (rival_slot, br) in responses.iter().enumerate() {
        for &own_slot in br {
            if responses[own_slot].binary_search(&rival_slot).is_err() {
                continue;
            }
            let (a_i, a_j) = (actions[own_slot], actions[rival_slot]);
            match (a_i, a_j) {
                (Action::NoOperate, Action::NoOperate) => shutdown_ne = true,
                (Action::Price(x), Action::Price(y)) if x == y => symmetric.push(x),
                (Action::Price(_), Action::Price(_)) => asymmetric.push((a_i, a_j)),
                _ => monopoly.push((a_i, a_j)),
            }
        }
    }
    debug_assert!(asymmetric.iter().all(|&(a, b)| asymmetric.contains(&(b, a))));
    symmetric.sort_unstable();
    asymmetric.sort();
    monopoly.sort();
    Ok(EquilibriumSet { regime: game.regime(), symmetric, asymmetric, monopoly, shutdown_ne, source: Source::BruteForce })
}

/// Per-price utilities that do not depend on the rival's exact price.
struct PriceTables {
    w2: Vec<f64>,
    w3: Vec<f64>,
    w4: Vec<f64>,
    /// `w2_above[l]` = max of `w2` over indices strictly above `l`.
    w2_above: Vec<f64>,
}

impl PriceTables {
    fn new(game: &Subgame) -> Self {
        let (p, q, g) = (&game.params, game.q, &game.grid);
        let prices: Vec<f64> = (0..=g.max_index()).map(|l| g.price(l)).collect();
        let w2: Vec<f64> = prices.iter().map(|&x| w2(p, q, x)).collect();
        let w3 = prices.iter().map(|&x| w3(p, q, x)).collect();
        let w4 = prices.iter().map(|&x| w4(p, q, x)).collect();
        let mut w2_above = vec![f64::NEG_INFINITY; prices.len()];
        for l in (0..prices.len() - 1).rev() {
            w2_above[l] = w2_above[l + 1].max(w2[l + 1]);
        }
        Self { w2, w3, w4, w2_above }
    }
}

impl Subgame {
    /// Whether `u` is at least every undercut payoff `w1(x, rival)` for `x` below
    /// `rival`, skipping index `skip`; stops at the first violation.
    fn beats_undercuts(&self, u: f64, rival: u32, skip: Option<u32>) -> bool {
        let p_rival = self.grid.price(rival);
        (0..rival)
            .rev()
            .filter(|&x| Some(x) != skip)
            .all(|x| weakly_geq(u, w1(&self.params, self.q, self.grid.price(x), p_rival)))
    }
}

/// Symmetric profiles: the match must beat staying out, every higher price and every undercut.
fn pruned_symmetric(game: &Subgame, t: &PriceTables) -> Vec<u32> {
    (0..game.grid.len() as u32)
        .into_par_iter()
        .filter(|&l| {
            let u = t.w3[l as usize];
            weakly_geq(u, 0.0) && weakly_geq(u, t.w2_above[l as usize]) && game.beats_undercuts(u, l, None)
        })
        .collect()
}

/// Exact equilibrium search that prunes with necessary conditions before the
/// full best-response test. Returns the same set as [`brute_force_nash`] with
/// far fewer utility evaluations; used by the sweeps.
pub fn enumerate_nash(params: &MarketParams, q: f64, grid: &PriceGrid) -> Result<EquilibriumSet, ParamError> {
    let game = Subgame::new(*params, q, *grid)?;
    let t = PriceTables::new(&game);
    let n = grid.len();

    let symmetric = pruned_symmetric(&game, &t);

    // asymmetric (low, high): the high side keeps w2(high), which must beat
    // staying out, matching the low price and every other price above low
    let mut asymmetric = Vec::new();
    for high in 1..n {
        let u_high = t.w2[high];
        if !weakly_geq(u_high, 0.0) {
            continue;
        }
        for low in 0..high {
            if !weakly_geq(u_high, t.w2_above[low]) || !weakly_geq(u_high, t.w3[low]) {
                continue;
            }
            let (lo, hi) = (Action::Price(low as u32), Action::Price(high as u32));
            let u_low = game.utility(lo, hi);
            let low_ok = weakly_geq(u_low, 0.0)
                && weakly_geq(u_low, t.w3[high])
                && weakly_geq(u_low, t.w2_above[high])
                && game.beats_undercuts(u_low, high as u32, Some(low as u32));
            // the high side's remaining deviations: undercutting the low price
            if low_ok && game.beats_undercuts(u_high, low as u32, None) {
                asymmetric.push((lo, hi));
                asymmetric.push((hi, lo));
            }
        }
    }
    asymmetric.sort();

    // monopoly (price, out): the price maximizes w4 and the rival prefers staying out
    let best_w4 = t.w4.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut monopoly = Vec::new();
    for l in 0..n {
        if !weakly_geq(t.w4[l], best_w4) || !weakly_geq(t.w4[l], 0.0) {
            continue;
        }
        let a = Action::Price(l as u32);
        if game.is_best_response(Action::NoOperate, a) {
            monopoly.push((a, Action::NoOperate));
            monopoly.push((Action::NoOperate, a));
        }
    }
    monopoly.sort();
    let shutdown_ne = weakly_geq(0.0, best_w4);

    Ok(EquilibriumSet { regime: game.regime(), symmetric, asymmetric, monopoly, shutdown_ne, source: Source::PrunedSearch })
}

/// Exact symmetric operating equilibria: every `l` with `l` a best response to itself.
pub fn symmetric_ne_exact(params: &MarketParams, q: f64, grid: &PriceGrid) -> Result<Vec<u32>, ParamError> {
    let game = Subgame::new(*params, q, *grid)?;
    Ok(pruned_symmetric(&game, &PriceTables::new(&game)))
}

/// Positive root of `-a x^2 + b x + c` for `a > 0, c >= 0`,
/// or of the linear form when `a == 0`.
fn upper_root(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    (b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a)
}

/// Closed-form price interval whose grid points are symmetric equilibria,
/// with the intermediate coefficients kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricNeInterval {
    pub regime: Regime,
    pub s: f64,
    pub e: f64,
    pub lambda_s: f64,
    pub rho_s: f64,
    pub lambda_s_under: f64,
    pub lambda_e: f64,
    pub rho_e: f64,
    /// Interval on which the common utility is non-negative.
    pub tight_lo: f64,
    pub tight_hi: f64,
    /// Largest price at which matching beats undercutting by one step.
    pub undercut_root: f64,
    /// Upper bound from undercutting and break-even alone.
    pub e_tilde: f64,
    /// Lower root of `common utility >= best undercut-free alternative` (duopoly only).
    pub s_duopoly: Option<f64>,
    /// Grid indices `l >= 1` with `l delta` in `[s, e]`.
    pub members: Vec<u32>,
}

impl SymmetricNeInterval {
    pub fn nonempty(&self) -> bool {
        !self.members.is_empty()
    }
}

pub fn symmetric_ne_interval(
    params: &MarketParams,
    q: f64,
    grid: &PriceGrid,
) -> Result<SymmetricNeInterval, HypothesisViolated> {
    let regime = classify_regime(params, q, grid);
    if regime == Regime::CompleteChoking {
        return Err(HypothesisViolated::CompleteChoking { q });
    }
    let q_bar_s = payoffs::q_bar_s(params);
    if q > q_bar_s {
        return Err(HypothesisViolated::AboveSymmetricThreshold { q, q_bar_s });
    }
    let MarketParams { d_bar, alpha, eps, o_m, .. } = *params;
    let slope = params.net_slope();
    let cost = EffectiveCost::new(params, q).0;
    let delta = grid.delta();
    let w2_star = payoffs::l_bar(params, q, grid).value;

    let lambda_s = d_bar + slope * cost;
    let rho_s = -d_bar * cost - w2_star.max(0.0) - o_m;
    let lambda_s_under = d_bar - slope * cost;
    let lambda_e = alpha * cost * eps + alpha * delta * (3.0 * eps - 2.0);
    let rho_e = delta * slope * (cost + delta) + d_bar * delta;

    let tight_disc = (lambda_s_under * lambda_s_under - 4.0 * slope * o_m).max(0.0).sqrt();
    let tight_lo = (lambda_s - tight_disc) / (2.0 * slope);
    let tight_hi = (lambda_s + tight_disc) / (2.0 * slope);
    let undercut_root = upper_root(alpha * eps, lambda_e, rho_e);
    let e_tilde = undercut_root.min(tight_hi);

    let duopoly = regime == Regime::Duopoly;
    let (s, e, s_duopoly) = if duopoly {
        let disc = (lambda_s * lambda_s + 4.0 * slope * rho_s).max(0.0).sqrt();
        let lo = (lambda_s - disc) / (2.0 * slope);
        let hi = (lambda_s + disc) / (2.0 * slope);
        (tight_lo.max(lo), hi.min(e_tilde), Some(lo))
    } else {
        (tight_lo.max(0.0), e_tilde, None)
    };

    let members = if s <= e {
        let first = (s / delta).ceil().max(1.0) as u64;
        let last = (e / delta).floor().min(grid.max_index() as f64);
        if last < first as f64 {
            Vec::new()
        } else {
            (first..=last as u64)
                .map(|l| l as u32)
                .filter(|&l| {
                    let p = grid.price(l);
                    p >= s && p <= e
                })
                .collect()
        }
    } else {
        Vec::new()
    };

    Ok(SymmetricNeInterval {
        regime,
        s,
        e,
        lambda_s,
        rho_s,
        lambda_s_under,
        lambda_e,
        rho_e,
        tight_lo,
        tight_hi,
        undercut_root,
        e_tilde,
        s_duopoly,
        members,
    })
}

/// Gain from matching a rival at `l delta` rather than undercutting to `(l-1) delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchGain {
    /// Difference of the clamped utilities.
    pub direct: f64,
    /// Unclamped quadratic in `l delta`.
    pub quadratic: f64,
    /// Whether no demand clamp is active in either utility.
    pub clamp_free: bool,
}

pub fn v_of_l(params: &MarketParams, q: f64, grid: &PriceGrid, l: u32) -> MatchGain {
    assert!(l >= 1, "undercutting needs a price below l");
    let MarketParams { d_bar, alpha, eps, .. } = *params;
    let slope = params.net_slope();
    let cost = EffectiveCost::new(params, q).0;
    let delta = grid.delta();
    let p = grid.price(l);
    let below = grid.price(l - 1);
    let direct = w3(params, q, p) - w1(params, q, below, p);
    let lambda_e = alpha * cost * eps + alpha * delta * (3.0 * eps - 2.0);
    let rho_e = delta * slope * (cost + delta) + d_bar * delta;
    let quadratic = -p * p * alpha * eps + p * lambda_e + rho_e;
    let clamp_free = d_bar - slope * p >= 0.0 && d_bar - slope * below + eps * alpha * p >= 0.0;
    MatchGain { direct, quadratic, clamp_free }
}

/// Closed-form asymmetric equilibria `(l_bar, l_bar - 1)` and mirror.
///
/// The candidate is screened with the two inequalities of the existence
/// argument and then confirmed by exact best-response checks, so every
/// returned profile is an equilibrium.
pub fn asymmetric_ne(params: &MarketParams, q: f64, grid: &PriceGrid) -> Vec<(Action, Action)> {
    let game = Subgame { params: *params, q, grid: *grid };
    if game.regime() != Regime::Duopoly {
        return Vec::new();
    }
    let lb = game.l_bar();
    if lb.index == 0 {
        return Vec::new();
    }
    let MarketParams { alpha, eps, d_bar, .. } = *params;
    let cost = EffectiveCost::new(params, q).0;
    let delta = grid.delta();
    let lambda_e = alpha * cost * eps + alpha * delta * (3.0 * eps - 2.0);
    let rho_e = delta * params.net_slope() * (cost + delta) + d_bar * delta;
    let root = upper_root(alpha * eps, lambda_e, rho_e);

    let high = Action::Price(lb.index);
    let low = Action::Price(lb.index - 1);
    let below_low = if lb.index >= 2 {
        game.utility(Action::Price(lb.index - 2), low)
    } else {
        f64::NEG_INFINITY
    };
    let match_low = game.utility(low, low);
    let screened = weakly_geq(grid.price(lb.index), root) && weakly_geq(lb.value, below_low.min(match_low));
    if !screened || !game.is_nash(high, low) {
        return Vec::new();
    }
    vec![(low, high), (high, low)]
}

/// Closed-form equilibrium set: interval members plus screened asymmetric pair.
pub fn closed_form_nash(params: &MarketParams, q: f64, grid: &PriceGrid) -> EquilibriumSet {
    let regime = classify_regime(params, q, grid);
    let symmetric = symmetric_ne_interval(params, q, grid).map(|i| i.members).unwrap_or_default();
    EquilibriumSet {
        regime,
        symmetric,
        asymmetric: asymmetric_ne(params, q, grid),
        monopoly: Vec::new(),
        shutdown_ne: regime == Regime::CompleteChoking,
        source: Source::ClosedForm,
    }
}

/// One row of a shrinking-denomination trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTrace {
    pub delta: f64,
    pub symmetric: usize,
    pub asymmetric: usize,
}

impl DeltaTrace {
    pub fn operating(&self) -> usize {
        self.symmetric + self.asymmetric
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinDeltaReport {
    pub q: f64,
    pub trace: Vec<DeltaTrace>,
    /// Largest tested denomination without any operating equilibrium.
    pub largest_without_ne: Option<f64>,
}

/// Halves the denomination from `delta_hi` up to `halvings` times and counts
/// operating equilibria at each step with the exhaustive enumerator.
pub fn min_delta_no_ne(params: &MarketParams, q: f64, delta_hi: f64, halvings: u32) -> Result<MinDeltaReport, ParamError> {
    let mut trace = Vec::with_capacity(halvings as usize + 1);
    let mut delta = delta_hi;
    for _ in 0..=halvings {
        trace.push(count_operating(params, q, delta)?);
        delta /= 2.0;
    }
    let largest_without_ne = trace.iter().filter(|t| t.operating() == 0).map(|t| t.delta).reduce(f64::max);
    Ok(MinDeltaReport { q, trace, largest_without_ne })
}

/// Operating equilibrium counts at one denomination.
pub fn count_operating(params: &MarketParams, q: f64, delta: f64) -> Result<DeltaTrace, ParamError> {
    let grid = PriceGrid::for_market(params, delta)?;
    let set = brute_force_nash(params, q, &grid)?;
    Ok(DeltaTrace { delta, symmetric: set.symmetric.len(), asymmetric: set.asymmetric.len() })
}
