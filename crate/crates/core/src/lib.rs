//! Pricing and matching for three-tier fog computing markets.
//!
//! Data service operators (DSOs) price virtualised computing resource
//! blocks (CRBs) for their subscribers (DSSs), then rent physical CRBs from
//! fog nodes (FNs) through quantity-based deferred acceptance, and finally
//! split the rented CRBs among their subscribers with a second matching.
//! Demand the fog nodes cannot cover is served by a remote data center.
//!
//! All model types are generic over a [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the experiment
//! harness uses.

pub mod equilibrium;
pub mod error;
pub mod market;
pub mod matching;
pub mod model;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = model::Point<f64>;
pub type DssAgent = model::DssAgent<f64>;
pub type DsoAgent = model::DsoAgent<f64>;
pub type FogNodeAgent = model::FogNodeAgent<f64>;
pub type Scenario = model::Scenario<f64>;
pub type Allocation = model::Allocation<f64>;
pub type PricingResult = equilibrium::PricingResult<f64>;
pub type DelayBreakdown = equilibrium::DelayBreakdown<f64>;
pub type MatchSide = matching::MatchSide<f64>;
pub type MatchTrace = matching::MatchTrace<f64>;
pub type BlockingPair = matching::BlockingPair<f64>;
pub type MarketOutcome = market::MarketOutcome<f64>;
pub type UtilityReport = market::UtilityReport<f64>;

/// Single-precision variants.
pub type ScenarioF32 = model::Scenario<f32>;
pub type MarketOutcomeF32 = market::MarketOutcome<f32>;

pub use model::{PreferenceList, Rank, Violation};
