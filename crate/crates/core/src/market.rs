//! The full pipeline: subscribe, price, rent fog capacity for each DSO,
//! split each DSO's rented capacity among its subscribers, and account the
//! utilities of all three tiers.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, network_cost, set_prices, subscribe, PricingResult};
use crate::error::Result;
use crate::matching::{build_dso_fn_sides, build_fn_dss_sides, run_matching};
use crate::model::{Allocation, Scenario};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UtilityReport<T> {
    pub dss: Vec<T>,
    pub dso: Vec<T>,
    pub fns: Vec<T>,
    pub total_dss: T,
    pub total_dso: T,
    pub total_fn: T,
    /// CRBs each DSO buys from the remote data center.
    pub cloud: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MarketOutcome<T> {
    pub prices: Vec<T>,
    pub purchases: Vec<T>,
    /// DSO each DSS subscribed to, if any.
    pub subscription: Vec<Option<usize>>,
    pub participating: Vec<bool>,
    /// Keyed `(DSO id, FN id)`; the cloud map holds each DSO's data-center share.
    pub dso_fn: Allocation<T>,
    /// Keyed `(FN id, DSS id)`.
    pub fn_dss: Allocation<T>,
    pub utilities: UtilityReport<T>,
}

impl<T: Scalar> MarketOutcome<T> {
    /// Demand DSO `i` committed to: the purchases of its participating subscribers.
    pub fn dso_demand(&self, i: usize) -> T {
        self.purchases
            .iter()
            .zip(&self.subscription)
            .zip(&self.participating)
            .filter(|((_, sub), &part)| part && **sub == Some(i))
            .map(|((&q, _), _)| q)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Part of DSS `j`'s purchase not served by any fog node.
    pub fn dss_cloud_share(&self, j: usize) -> T {
        if !self.participating[j] {
            return T::zero();
        }
        let from_fns: T =
            self.fn_dss.iter().filter(|&(_, c, _)| c == j).map(|(_, _, q)| q).fold(T::zero(), |a, b| a + b);
        (self.purchases[j] - from_fns).max(T::zero())
    }

    pub fn cloud_total(&self) -> T {
        self.dso_fn.cloud_total()
    }
}

/// Runs all four stages on a validated scenario.
pub fn run_market<T: Scalar>(scenario: &Scenario<T>) -> Result<MarketOutcome<T>> {
    scenario.validate()?;
    let subscription = subscribe(scenario);
    let pricing = set_prices(scenario, &subscription)?;

    let (fns, dsos) = build_dso_fn_sides(scenario, &pricing);
    let (fn_dso, _) = run_matching(&fns, &dsos);
    let rented = fn_dso.transposed();

    let mut fn_dss = Allocation::new();
    let mut dso_fn = Allocation::new();
    for dso in &scenario.dsos {
        let (dsss, paired) = build_fn_dss_sides(scenario, dso.id, &rented, &pricing);
        let (dss_fn, _) = run_matching(&dsss, &paired);
        // Only what reaches a subscriber stays rented; unused quota is released.
        for (j, k, q) in dss_fn.iter() {
            fn_dss.add(k, j, q);
            dso_fn.add(dso.id, k, q);
        }
    }

    let mut outcome = MarketOutcome {
        prices: pricing.prices.clone(),
        purchases: pricing.purchases.clone(),
        subscription,
        participating: pricing.participating.clone(),
        dso_fn,
        fn_dss,
        utilities: empty_report(scenario),
    };
    fill_cloud(&mut outcome, scenario);
    outcome.utilities = account(&outcome, scenario)?;
    Ok(outcome)
}

/// Same subscription and prices as [`run_market`], but every CRB comes from
/// the remote data center.
pub fn cloud_only_baseline<T: Scalar>(scenario: &Scenario<T>) -> Result<MarketOutcome<T>> {
    scenario.validate()?;
    let subscription = subscribe(scenario);
    let PricingResult { prices, purchases, participating } = set_prices(scenario, &subscription)?;
    let mut outcome = MarketOutcome {
        prices,
        purchases,
        subscription,
        participating,
        dso_fn: Allocation::new(),
        fn_dss: Allocation::new(),
        utilities: empty_report(scenario),
    };
    fill_cloud(&mut outcome, scenario);
    outcome.utilities = account(&outcome, scenario)?;
    Ok(outcome)
}

fn empty_report<T: Scalar>(scenario: &Scenario<T>) -> UtilityReport<T> {
    UtilityReport {
        dss: vec![T::zero(); scenario.dsss.len()],
        dso: vec![T::zero(); scenario.dsos.len()],
        fns: vec![T::zero(); scenario.fns.len()],
        total_dss: T::zero(),
        total_dso: T::zero(),
        total_fn: T::zero(),
        cloud: vec![T::zero(); scenario.dsos.len()],
    }
}

fn fill_cloud<T: Scalar>(outcome: &mut MarketOutcome<T>, scenario: &Scenario<T>) {
    for i in 0..scenario.dsos.len() {
        let rest = outcome.dso_demand(i) - outcome.dso_fn.row_sum(i);
        outcome.dso_fn.set_cloud(i, rest.max(T::zero()));
    }
}

fn account<T: Scalar>(outcome: &MarketOutcome<T>, scenario: &Scenario<T>) -> Result<UtilityReport<T>> {
    let dss = dss_utilities(outcome, scenario)?;
    let dso = dso_utilities(outcome, scenario);
    let fns = fn_utilities(outcome, scenario);
    Ok(UtilityReport {
        total_dss: dss.iter().copied().fold(T::zero(), |a, b| a + b),
        total_dso: dso.iter().copied().fold(T::zero(), |a, b| a + b),
        total_fn: fns.iter().copied().fold(T::zero(), |a, b| a + b),
        cloud: (0..scenario.dsos.len()).map(|i| outcome.dso_fn.cloud(i)).collect(),
        dss,
        dso,
        fns,
    })
}

/// Fog node utility: `Σ_j η_{k,i(j)}·(p_k − κ·l_kj)·q_kj` over the DSSs it
/// serves, where `i(j)` is the DSO of DSS `j`. Negative margins are kept.
pub fn fn_utilities<T: Scalar>(outcome: &MarketOutcome<T>, scenario: &Scenario<T>) -> Vec<T> {
    let mut out = vec![T::zero(); scenario.fns.len()];
    for (k, j, q) in outcome.fn_dss.iter() {
        let Some(i) = outcome.subscription[j] else { continue };
        let node = &scenario.fns[k];
        let transmission = scenario.kappa * scenario.fn_dss_distance(k, j);
        out[k] = out[k] + node.dso_weights[i] * (node.rent - transmission) * q;
    }
    out
}

/// DSO utility: subscriber revenue minus fog rent minus data-center cost.
pub fn dso_utilities<T: Scalar>(outcome: &MarketOutcome<T>, scenario: &Scenario<T>) -> Vec<T> {
    scenario
        .dsos
        .iter()
        .enumerate()
        .map(|(i, dso)| {
            let revenue = outcome.prices[i] * outcome.dso_demand(i);
            let rent: T = outcome
                .dso_fn
                .iter()
                .filter(|&(r, _, _)| r == i)
                .map(|(_, k, q)| scenario.fns[k].rent * q)
                .fold(T::zero(), |a, b| a + b);
            revenue - rent - dso.cloud_unit_cost * outcome.dso_fn.cloud(i)
        })
        .collect()
}

/// DSS utility with delay realised from the serving nodes. A DSS split over
/// several servers sees the quantity-weighted mean of their distances, the
/// data-center share counting at `cloud_distance`.
pub fn dss_utilities<T: Scalar>(outcome: &MarketOutcome<T>, scenario: &Scenario<T>) -> Result<Vec<T>> {
    let mut weighted = vec![T::zero(); scenario.dsss.len()];
    for (k, j, q) in outcome.fn_dss.iter() {
        weighted[j] = weighted[j] + q * scenario.fn_dss_distance(k, j);
    }
    scenario
        .dsss
        .iter()
        .enumerate()
        .map(|(j, dss)| {
            let q = outcome.purchases[j];
            let Some(i) = outcome.subscription[j] else { return Ok(T::zero()) };
            if !outcome.participating[j] || q.is_zero() {
                return Ok(T::zero());
            }
            let cloud = outcome.dss_cloud_share(j);
            let mean_distance = (weighted[j] + cloud * scenario.cloud_distance) / q;
            let network = network_cost(scenario.theta, mean_distance);
            let (utility, _) = equilibrium::realized_dss_utility(dss, scenario.mu, outcome.prices[i], q, network)?;
            Ok(utility)
        })
        .collect()
}
