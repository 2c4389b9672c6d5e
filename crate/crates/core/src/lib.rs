//! Pricing game between one supplier and two symmetric manufacturers selling
//! to loyal and strategic customers on a discrete price grid.
//!
//! * [`market`]: parameters, price grid, mean-field customer split, demand.
//! * [`payoffs`]: manufacturer and supplier utilities, thresholds.
//! * [`equilibria`]: regimes, best responses, exhaustive and closed-form equilibria.
//! * [`stackelberg`]: focal equilibrium selection and supplier price sweeps.
//! * [`experiments`]: configuration and report generation behind the CLI.

pub mod equilibria;
pub mod error;
pub mod experiments;
pub mod market;
pub mod payoffs;
pub mod stackelberg;

pub use equilibria::{brute_force_nash, EquilibriumSet, Regime, Subgame};
pub use error::{HypothesisViolated, ParamError, SweepError};
pub use market::{Action, MarketParams, PriceGrid};
pub use payoffs::ActionProfile;
