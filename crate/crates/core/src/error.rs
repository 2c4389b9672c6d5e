use thiserror::Error;

/// A model parameter or grid violates its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{0} must be finite")]
    NotFinite(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must be non-negative")]
    Negative(&'static str),
    #[error("eps = {0} must lie in [0, 1)")]
    EpsOutOfRange(f64),
    #[error("market potential too small: d_bar = {d_bar} must exceed alpha (c_s + c_m) - 2 sqrt(alpha o_m) = {floor}")]
    A1Violated { d_bar: f64, floor: f64 },
    #[error("omega is zero; use the price-only demand model")]
    OmegaZero,
    #[error("price grid truncated at index {max_index}, needs at least {required}")]
    GridTooCoarse { max_index: u32, required: u32 },
    #[error("price grid would need {0} points")]
    GridTooLarge(f64),
}

/// The closed-form symmetric-equilibrium interval is only defined for supplier
/// prices outside complete choking and below the symmetric survival threshold.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypothesisViolated {
    #[error("supplier price {q} chokes even a monopolist")]
    CompleteChoking { q: f64 },
    #[error("supplier price {q} exceeds the symmetric survival threshold {q_bar_s}")]
    AboveSymmetricThreshold { q: f64, q_bar_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("no supplier price in the sweep admits a symmetric operating equilibrium")]
    NoFeasibleQ,
    #[error("invalid sweep grid: {0}")]
    BadGrid(String),
}
