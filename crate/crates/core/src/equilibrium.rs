//! Leader/follower pricing between DSOs and their subscribers.
//!
//! DSSs subscribe to their top-ranked DSO, the DSO announces a per-CRB
//! price and every subscriber buys the quantity that maximises
//! `αλ − βqr − γt`. The follower's best response has a closed form, so the
//! whole stage is a handful of formulas; no iterative solver is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DssAgent, Scenario};
use crate::scalar::Scalar;

/// Service delay of one DSS, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DelayBreakdown<T> {
    pub queueing: T,
    pub network: T,
    pub total: T,
}

impl<T: Scalar> DelayBreakdown<T> {
    pub fn new(queueing: T, network: T) -> Self {
        Self { queueing, network, total: queueing + network }
    }
}

/// Prices per DSO and purchases per DSS after the pricing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PricingResult<T> {
    pub prices: Vec<T>,
    pub purchases: Vec<T>,
    pub participating: Vec<bool>,
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Queueing delay `λ / (μ − λ/q)` for `q` CRBs serving arrival rate `λ`.
pub fn queueing_cost<T: Scalar>(lambda: T, mu: T, crbs: T) -> Result<T> {
    if lambda.is_zero() && crbs > T::zero() {
        return Ok(T::zero());
    }
    // μq > λ is the stability condition; written multiplied through by q.
    let slack = mu * crbs - lambda;
    if !(crbs > T::zero() && slack > T::zero()) {
        return Err(Error::UnstableQueue { lambda: to_f64(lambda), mu: to_f64(mu), crbs: to_f64(crbs) });
    }
    Ok(lambda * crbs / slack)
}

/// Network delay `θ·l`.
pub fn network_cost<T: Scalar>(theta: T, distance: T) -> T {
    theta * distance
}

/// Subscriber utility `αλ − βqr − γt`; an opted-out DSS (`q = 0`) scores zero.
pub fn dss_utility<T: Scalar>(dss: &DssAgent<T>, price: T, crbs: T, delay: T) -> T {
    if crbs.is_zero() {
        return T::zero();
    }
    dss.alpha * dss.arrival_rate - dss.beta * crbs * price - dss.gamma * delay
}

/// Subscriber utility with the delay derived from the purchase and a network delay.
pub fn realized_dss_utility<T: Scalar>(
    dss: &DssAgent<T>,
    mu: T,
    price: T,
    crbs: T,
    network: T,
) -> Result<(T, DelayBreakdown<T>)> {
    if crbs.is_zero() {
        return Ok((T::zero(), DelayBreakdown::new(T::zero(), T::zero())));
    }
    let delay = DelayBreakdown::new(queueing_cost(dss.arrival_rate, mu, crbs)?, network);
    Ok((dss_utility(dss, price, crbs, delay.total), delay))
}

/// Follower best response `λ/(μ·√(rβ/γ)) + λ/μ`.
pub fn optimal_purchase<T: Scalar>(lambda: T, mu: T, price: T, beta: T, gamma: T) -> Result<T> {
    if price.is_nan() || price <= T::zero() {
        return Err(Error::Domain(format!("price must be positive, got {price}")));
    }
    if lambda.is_zero() {
        return Ok(T::zero());
    }
    let base = lambda / mu;
    Ok(base / (price * beta / gamma).sqrt() + base)
}

/// Smallest purchase keeping the queueing delay within `t_th`: `λ·t_th / (μ·t_th − λ)`.
pub fn min_purchase<T: Scalar>(lambda: T, mu: T, t_th: T) -> Result<T> {
    let slack = mu * t_th - lambda;
    if slack.is_nan() || slack <= T::zero() {
        return Err(Error::Domain(format!(
            "delay bound {t_th} unreachable: mu * t_th = {} <= lambda = {lambda}",
            mu * t_th
        )));
    }
    Ok(lambda * t_th / slack)
}

/// Highest price at which the follower still buys at least [`min_purchase`]:
/// `(γ/β)·((μ·t_th − λ)/λ)²`.
pub fn price_cap<T: Scalar>(lambda: T, mu: T, t_th: T, beta: T, gamma: T) -> Result<T> {
    let slack = mu * t_th - lambda;
    if slack.is_nan() || slack <= T::zero() {
        return Err(Error::Domain(format!(
            "delay bound {t_th} unreachable: mu * t_th = {} <= lambda = {lambda}",
            mu * t_th
        )));
    }
    if lambda.is_nan() || lambda <= T::zero() {
        return Err(Error::Domain("price cap undefined without workload".into()));
    }
    let ratio = slack / lambda;
    Ok(gamma / beta * ratio * ratio)
}

/// Each DSS subscribes to the first DSO in its preference list.
pub fn subscribe<T: Scalar>(scenario: &Scenario<T>) -> Vec<Option<usize>> {
    scenario.dsss.iter().map(|d| d.dso_pref.top().filter(|&i| i < scenario.dsos.len())).collect()
}

/// Conservative network delay used before matching fixes the serving nodes.
pub fn worst_case_network_delay<T: Scalar>(scenario: &Scenario<T>) -> T {
    network_cost(scenario.theta, scenario.district_diameter())
}

/// Sets one price per DSO and the resulting purchases.
///
/// Each DSO charges the smallest price cap among its subscribers, so every
/// subscriber can still meet its delay bound. Subscribers whose utility
/// would be negative under the worst-case network delay opt out with `q = 0`.
pub fn set_prices<T: Scalar>(scenario: &Scenario<T>, subscription: &[Option<usize>]) -> Result<PricingResult<T>> {
    let n = scenario.dsss.len();
    let mut prices = vec![T::zero(); scenario.dsos.len()];
    let mut capped = vec![false; scenario.dsos.len()];
    for (dss, sub) in scenario.dsss.iter().zip(subscription) {
        let Some(i) = *sub else { continue };
        let cap = price_cap(dss.arrival_rate, scenario.mu, scenario.t_th, dss.beta, dss.gamma)?;
        prices[i] = if capped[i] { prices[i].min(cap) } else { cap };
        capped[i] = true;
    }

    let network = worst_case_network_delay(scenario);
    let mut purchases = vec![T::zero(); n];
    let mut participating = vec![false; n];
    for (j, (dss, sub)) in scenario.dsss.iter().zip(subscription).enumerate() {
        let Some(i) = *sub else { continue };
        let price = prices[i];
        let q = optimal_purchase(dss.arrival_rate, scenario.mu, price, dss.beta, dss.gamma)?;
        let (utility, _) = realized_dss_utility(dss, scenario.mu, price, q, network)?;
        if q > T::tolerance() && utility >= T::zero() {
            purchases[j] = q;
            participating[j] = true;
        }
    }
    Ok(PricingResult { prices, purchases, participating })
}
