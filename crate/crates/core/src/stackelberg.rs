//! Supplier as leader: for each quoted price the manufacturers settle on the
//! symmetric equilibrium with the highest common utility, and the supplier
//! picks the quote that maximizes its own utility given that outcome.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{classify_regime, symmetric_ne_exact, Regime};
use crate::error::{ParamError, SweepError};
use crate::market::{MarketParams, PriceGrid};
use crate::payoffs::{self, w3, weakly_geq};

/// The symmetric equilibrium both manufacturers are presumed to coordinate on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalNe {
    pub l_star: u32,
    pub price: f64,
    pub w3_value: f64,
    pub exists: bool,
}

impl FocalNe {
    fn none() -> Self {
        Self { l_star: 0, price: f64::NAN, w3_value: f64::NAN, exists: false }
    }
}

/// Highest-`w3` symmetric operating equilibrium; the lower price wins ties.
pub fn focal_ne(params: &MarketParams, q: f64, grid: &PriceGrid) -> Result<FocalNe, ParamError> {
    let symmetric = symmetric_ne_exact(params, q, grid)?;
    Ok(focal_among(params, q, grid, &symmetric))
}

fn focal_among(params: &MarketParams, q: f64, grid: &PriceGrid, symmetric: &[u32]) -> FocalNe {
    let mut best = FocalNe::none();
    // ascending order, so only a strictly better value replaces the incumbent
    for &l in symmetric {
        let value = w3(params, q, grid.price(l));
        if !best.exists || (value > best.w3_value && !weakly_geq(best.w3_value, value)) {
            best = FocalNe { l_star: l, price: grid.price(l), w3_value: value, exists: true };
        }
    }
    best
}

/// Supplier utility when both manufacturers charge `price`.
pub fn supplier_utility_symmetric(params: &MarketParams, q: f64, price: f64) -> f64 {
    2.0 * (params.d_bar - params.net_slope() * price).max(0.0) * (q - params.c_s) - params.o_s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierSweepRow {
    pub q: f64,
    pub regime: Regime,
    pub focal: FocalNe,
    /// Supplier utility at the focal equilibrium; `None` without one.
    pub u_s: Option<f64>,
    /// Per-manufacturer utility at the focal equilibrium.
    pub u_m: Option<f64>,
    /// Number of symmetric operating equilibria at this quote.
    pub ne_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub q_step: f64,
    pub q_max: f64,
}

impl QGrid {
    /// Tenth of the denomination up to just past the monopoly threshold.
    pub fn default_for(params: &MarketParams, grid: &PriceGrid) -> Self {
        Self { q_step: grid.delta() / 10.0, q_max: payoffs::q_bar_m(params) + grid.delta() }
    }

    /// Quotes `q_step, 2 q_step, ...` not exceeding `q_max`.
    pub fn points(&self) -> Result<Vec<f64>, SweepError> {
        if !(self.q_step > 0.0 && self.q_step.is_finite()) {
            return Err(SweepError::BadGrid(format!("q_step = {} must be positive", self.q_step)));
        }
        if !(self.q_max >= self.q_step && self.q_max.is_finite()) {
            return Err(SweepError::BadGrid(format!("q_max = {} must be at least q_step = {}", self.q_max, self.q_step)));
        }
        let n = (self.q_max / self.q_step * (1.0 + 1e-12)).floor() as u64;
        Ok((1..=n).map(|k| k as f64 * self.q_step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierSweep {
    pub rows: Vec<SupplierSweepRow>,
    /// Smallest swept quote at which the undercut manufacturer can no longer break even.
    pub partial_choking_threshold: Option<f64>,
}

pub fn supplier_sweep(params: &MarketParams, grid: &PriceGrid, q_grid: &QGrid) -> Result<SupplierSweep, SweepError> {
    let qs = q_grid.points()?;
    let rows = qs
        .par_iter()
        .map(|&q| sweep_row(params, grid, q))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SweepError::BadGrid(e.to_string()))?;
    let partial_choking_threshold = qs.iter().copied().find(|&q| payoffs::l_bar(params, q, grid).value < 0.0);
    Ok(SupplierSweep { rows, partial_choking_threshold })
}

fn sweep_row(params: &MarketParams, grid: &PriceGrid, q: f64) -> Result<SupplierSweepRow, ParamError> {
    let symmetric = symmetric_ne_exact(params, q, grid)?;
    let focal = focal_among(params, q, grid, &symmetric);
    let (u_s, u_m) = if focal.exists {
        (Some(supplier_utility_symmetric(params, q, focal.price)), Some(focal.w3_value))
    } else {
        (None, None)
    };
    Ok(SupplierSweepRow { q, regime: classify_regime(params, q, grid), focal, u_s, u_m, ne_count: symmetric.len() })
}

/// Best quote among rows with a focal equilibrium; the smaller quote wins ties.
pub fn optimal_supplier_price(rows: &[SupplierSweepRow]) -> Result<(f64, f64), SweepError> {
    let mut best: Option<(f64, f64)> = None;
    for row in rows {
        let Some(u) = row.u_s else { continue };
        best = match best {
            None => Some((row.q, u)),
            Some((_, bu)) if u > bu && !weakly_geq(bu, u) => Some((row.q, u)),
            Some((bq, bu)) if weakly_geq(bu, u) && weakly_geq(u, bu) && row.q < bq => Some((row.q, u)),
            keep => keep,
        };
    }
    best.ok_or(SweepError::NoFeasibleQ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Action;
    use crate::payoffs::{approx_eq, supplier_utility_raw, ActionProfile};

    fn worked() -> (MarketParams, PriceGrid) {
        let p = MarketParams::default();
        (p, PriceGrid::for_market(&p, 4.0).unwrap())
    }

    #[test]
    fn focal_of_worked_instance() {
        let (p, g) = worked();
        let f = focal_ne(&p, 1.0, &g).unwrap();
        assert!(f.exists);
        assert_eq!(f.l_star, 3);
        assert!(approx_eq(f.price, 12.0));
        assert!(approx_eq(f.w3_value, 59.2));
        assert!(!focal_ne(&p, 200.0, &g).unwrap().exists);
    }

    #[test]
    fn focal_tie_prefers_lower_price() {
        // w3 is symmetric about its vertex; place two grid points equidistant from it
        let p = MarketParams { eps: 0.0, o_m: 0.0, c_m: 0.0, ..MarketParams::default() };
        let g = PriceGrid::for_market(&p, 1.0).unwrap();
        // vertex at 8: prices 7 and 9 tie
        let f = focal_among(&p, 0.0, &g, &[7, 9]);
        assert_eq!(f.l_star, 7);
        assert_eq!(focal_among(&p, 0.0, &g, &[9]).l_star, 9);
    }

    #[test]
    fn symmetric_supplier_utility_matches_raw() {
        let (p, g) = worked();
        let u = supplier_utility_symmetric(&p, 1.0, 12.0);
        assert!(approx_eq(u, 13.454));
        let raw = supplier_utility_raw(&p, &g, &ActionProfile::new(Action::Price(3), Action::Price(3), 1.0));
        assert!(approx_eq(u, raw));
    }

    #[test]
    fn sweep_row_at_unit_quote() {
        let (p, g) = worked();
        let sweep = supplier_sweep(&p, &g, &QGrid { q_step: 1.0, q_max: 3.0 }).unwrap();
        assert_eq!(sweep.rows.len(), 3);
        assert!(approx_eq(sweep.rows[0].u_s.unwrap(), 13.454));
    }

    #[test]
    fn q_grid_rejects_bad_steps() {
        assert!(QGrid { q_step: 0.0, q_max: 1.0 }.points().is_err());
        assert!(QGrid { q_step: 1.0, q_max: 0.5 }.points().is_err());
        assert_eq!(QGrid { q_step: 0.1, q_max: 0.3 }.points().unwrap().len(), 3);
    }

    fn row(q: f64, u_s: Option<f64>) -> SupplierSweepRow {
        let focal = if u_s.is_some() { FocalNe { l_star: 1, price: 1.0, w3_value: 0.0, exists: true } } else { FocalNe::none() };
        SupplierSweepRow { q, regime: Regime::Duopoly, focal, u_s, u_m: u_s.map(|_| 0.0), ne_count: usize::from(u_s.is_some()) }
    }

    #[test]
    fn optimum_selection() {
        assert_eq!(optimal_supplier_price(&[row(1.0, Some(3.0))]).unwrap(), (1.0, 3.0));
        assert_eq!(optimal_supplier_price(&[row(1.0, None)]), Err(SweepError::NoFeasibleQ));
        let rows = [row(1.0, Some(3.0)), row(2.0, Some(5.0)), row(3.0, Some(5.0)), row(4.0, None)];
        assert_eq!(optimal_supplier_price(&rows).unwrap(), (2.0, 5.0));
        let mut more = rows.to_vec();
        more.push(row(5.0, None));
        assert_eq!(optimal_supplier_price(&more), optimal_supplier_price(&rows));
    }
}
