//! Quantity-based many-to-many deferred acceptance.
//!
//! Proposers (fog nodes in the DSO–FN market, DSSs in each DSO's FN–DSS
//! market) walk their preference lists with a pointer. Every round each
//! proposer that still has unallocated quantity offers all of it to the
//! acceptor under its pointer. Acceptors pool what they already hold with
//! the new offers and keep the best-ranked quantity up to their demand,
//! splitting at the marginal proposer.
//!
//! A proposer advances its pointer before proposing unless its flag is set.
//! Flags start set, so the first proposal goes to the top choice, and are set
//! again whenever an acceptor cuts quantity it had previously retained from
//! that proposer. The freed quantity is then offered to the same pointed
//! acceptor in the next round before moving on.
//!
//! Matching stops once a round produces no offers: every proposer is either
//! fully allocated or has walked past the end of its list.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::PricingResult;
use crate::model::{Allocation, PreferenceList, Rank, Scenario};
use crate::scalar::Scalar;

/// One side of a matching market.
///
/// `quantity[n]` is the supply of proposer `agents[n]` or the demand of
/// acceptor `agents[n]`; `prefs[n]` ranks ids of the opposite side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchSide<T> {
    pub agents: Vec<usize>,
    pub quantity: Vec<T>,
    pub prefs: Vec<PreferenceList>,
}

impl<T: Scalar> MatchSide<T> {
    pub fn new(agents: Vec<usize>, quantity: Vec<T>, prefs: Vec<PreferenceList>) -> Self {
        assert_eq!(agents.len(), quantity.len(), "one quantity per agent");
        assert_eq!(agents.len(), prefs.len(), "one preference list per agent");
        Self { agents, quantity, prefs }
    }

    pub fn empty() -> Self {
        Self { agents: Vec::new(), quantity: Vec::new(), prefs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    fn position_of(&self, id: usize) -> Option<usize> {
        self.agents.iter().position(|&a| a == id)
    }

    fn index(&self) -> HashMap<usize, usize> {
        self.agents.iter().enumerate().map(|(n, &id)| (id, n)).collect()
    }
}

/// Engine state at the end of a round. Pointers and flags are indexed like
/// the proposer side's `agents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchState<T> {
    pub round: usize,
    pub pointers: Vec<usize>,
    pub flags: Vec<bool>,
    /// Entries keyed `(proposer id, acceptor id)`.
    pub allocation: Allocation<T>,
}

/// One proposer/acceptor interaction within a round.
///
/// Rows with `offered == 0` record quantity displaced from an earlier round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceRow<T> {
    pub round: usize,
    pub proposer: usize,
    pub acceptor: usize,
    pub offered: T,
    pub accepted: T,
    pub rejected: T,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchTrace<T> {
    /// Proposer ids, in the order used by every state's pointers and flags.
    pub proposers: Vec<usize>,
    /// State before the first round followed by the state after each round.
    pub states: Vec<MatchState<T>>,
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> MatchTrace<T> {
    /// Number of rounds in which at least one offer was made.
    pub fn rounds(&self) -> usize {
        self.states.last().map_or(0, |s| s.round)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BlockingPair<T> {
    pub proposer: usize,
    pub acceptor: usize,
    pub quantity: T,
}

/// A proposer whose pointer moved backwards between two consecutive states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointerViolation {
    pub proposer: usize,
    pub round: usize,
    pub from: usize,
    pub to: usize,
}

impl std::fmt::Display for PointerViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "pointer of proposer {} moved back from {} to {} in round {}",
            self.proposer, self.from, self.to, self.round
        )
    }
}

impl std::error::Error for PointerViolation {}

/// Runs deferred acceptance and returns the final allocation, keyed
/// `(proposer id, acceptor id)`, together with the round-by-round trace.
pub fn run_matching<T: Scalar>(proposers: &MatchSide<T>, acceptors: &MatchSide<T>) -> (Allocation<T>, MatchTrace<T>) {
    let tol = T::tolerance();
    let n = proposers.len();
    let acceptor_index = acceptors.index();
    let proposer_index = proposers.index();

    // Proposer lists translated to acceptor positions; unknown ids are dropped.
    let lists: Vec<Vec<usize>> = proposers
        .prefs
        .iter()
        .map(|p| p.as_slice().iter().filter_map(|id| acceptor_index.get(id).copied()).collect())
        .collect();
    // rank[a][p]: position of proposer p in acceptor a's list, None if unacceptable.
    let rank: Vec<Vec<Option<usize>>> = acceptors
        .prefs
        .iter()
        .map(|pref| {
            let mut r = vec![None; n];
            for (pos, id) in pref.as_slice().iter().enumerate() {
                if let Some(&p) = proposer_index.get(id) {
                    if r[p].is_none() {
                        r[p] = Some(pos);
                    }
                }
            }
            r
        })
        .collect();

    let mut pointers = vec![0usize; n];
    let mut flags = vec![true; n];
    let mut residual: Vec<T> = proposers.quantity.iter().map(|&q| q.max(T::zero())).collect();
    // held[a]: (proposer position, quantity), best-ranked first.
    let mut held: Vec<Vec<(usize, T)>> = vec![Vec::new(); acceptors.len()];

    let mut trace = MatchTrace { proposers: proposers.agents.clone(), states: Vec::new(), rows: Vec::new() };
    let snapshot = |round: usize, pointers: &[usize], flags: &[bool], held: &[Vec<(usize, T)>]| MatchState {
        round,
        pointers: pointers.to_vec(),
        flags: flags.to_vec(),
        allocation: to_allocation(held, proposers, acceptors),
    };
    trace.states.push(snapshot(0, &pointers, &flags, &held));

    let mut round = 0;
    loop {
        let mut offers: Vec<Vec<(usize, T)>> = vec![Vec::new(); acceptors.len()];
        let mut any_offer = false;
        for p in 0..n {
            if residual[p] <= tol || pointers[p] >= lists[p].len() {
                continue;
            }
            if !flags[p] {
                pointers[p] += 1;
            }
            flags[p] = false;
            if let Some(&a) = lists[p].get(pointers[p]) {
                offers[a].push((p, residual[p]));
                any_offer = true;
            }
        }
        if !any_offer {
            break;
        }
        round += 1;

        for (a, new_offers) in offers.into_iter().enumerate() {
            if new_offers.is_empty() {
                continue;
            }
            let before: HashMap<usize, T> = held[a].iter().copied().collect();
            let mut pool: Vec<(usize, T)> = held[a].clone();
            for &(p, q) in &new_offers {
                match pool.iter_mut().find(|(held_p, _)| *held_p == p) {
                    Some(entry) => entry.1 = entry.1 + q,
                    None => pool.push((p, q)),
                }
            }
            pool.retain(|(p, _)| rank[a][*p].is_some());
            pool.sort_by_key(|(p, _)| rank[a][*p]);

            let mut room = acceptors.quantity[a].max(T::zero());
            let mut kept = Vec::with_capacity(pool.len());
            for (p, q) in pool {
                let take = q.min(room);
                if take > tol {
                    kept.push((p, take));
                    room = room - take;
                }
            }
            let after: HashMap<usize, T> = kept.iter().copied().collect();
            held[a] = kept;

            for &(p, offered) in &new_offers {
                let old = before.get(&p).copied().unwrap_or_else(T::zero);
                let new = after.get(&p).copied().unwrap_or_else(T::zero);
                if new < old - tol {
                    flags[p] = true;
                }
                let accepted = (new - old).max(T::zero());
                residual[p] = residual[p] - (new - old);
                trace.rows.push(TraceRow {
                    round,
                    proposer: proposers.agents[p],
                    acceptor: acceptors.agents[a],
                    offered,
                    accepted,
                    rejected: (offered - accepted).max(T::zero()),
                    flag: flags[p],
                });
            }
            for (&p, &old) in &before {
                if new_offers.iter().any(|&(o, _)| o == p) {
                    continue;
                }
                let new = after.get(&p).copied().unwrap_or_else(T::zero);
                if new < old - tol {
                    flags[p] = true;
                    residual[p] = residual[p] + (old - new);
                    trace.rows.push(TraceRow {
                        round,
                        proposer: proposers.agents[p],
                        acceptor: acceptors.agents[a],
                        offered: T::zero(),
                        accepted: T::zero(),
                        rejected: old - new,
                        flag: true,
                    });
                }
            }
        }
        trace.states.push(snapshot(round, &pointers, &flags, &held));
    }

    let allocation = to_allocation(&held, proposers, acceptors);
    (allocation, trace)
}

fn to_allocation<T: Scalar>(
    held: &[Vec<(usize, T)>],
    proposers: &MatchSide<T>,
    acceptors: &MatchSide<T>,
) -> Allocation<T> {
    let mut out = Allocation::new();
    for (a, list) in held.iter().enumerate() {
        for &(p, q) in list {
            out.add(proposers.agents[p], acceptors.agents[a], q);
        }
    }
    out
}

/// Searches for a proposer/acceptor pair that would both gain by moving a
/// positive quantity onto their pair. The allocation is keyed
/// `(proposer id, acceptor id)`; pairs are scanned in side order.
pub fn find_blocking_pair<T: Scalar>(
    allocation: &Allocation<T>,
    proposers: &MatchSide<T>,
    acceptors: &MatchSide<T>,
) -> Option<BlockingPair<T>> {
    let tol = T::tolerance();
    for (pn, &p) in proposers.agents.iter().enumerate() {
        let p_pref = &proposers.prefs[pn];
        let p_residual = proposers.quantity[pn] - allocation.row_sum(p);
        for (an, &a) in acceptors.agents.iter().enumerate() {
            let a_pref = &acceptors.prefs[an];
            let (Some(p_rank_of_a), Some(a_rank_of_p)) = (p_pref.rank_of(a), a_pref.rank_of(p)) else {
                continue;
            };

            // What the proposer could redirect: spare supply plus anything
            // placed with acceptors it likes less than `a`.
            let mut p_free = p_residual.max(T::zero());
            for (_, other, q) in allocation.iter().filter(|&(r, _, _)| r == p) {
                let worse = p_pref.rank_of(other).is_none_or(|r| r > p_rank_of_a);
                if worse {
                    p_free = p_free + q;
                }
            }

            let a_residual = acceptors.quantity[an] - allocation.col_sum(a);
            let mut a_free = a_residual.max(T::zero());
            for (other, _, q) in allocation.iter().filter(|&(_, c, _)| c == a) {
                let worse = a_pref.rank_of(other).is_none_or(|r| r > a_rank_of_p);
                if worse {
                    a_free = a_free + q;
                }
            }

            let quantity = p_free.min(a_free);
            if quantity > tol {
                return Some(BlockingPair { proposer: p, acceptor: a, quantity });
            }
        }
    }
    None
}

/// Checks that no proposer's pointer ever moves backwards.
pub fn assert_pointer_monotone<T: Scalar>(trace: &MatchTrace<T>) -> Result<(), PointerViolation> {
    for window in trace.states.windows(2) {
        let (prev, next) = (&window[0], &window[1]);
        for (n, (&from, &to)) in prev.pointers.iter().zip(&next.pointers).enumerate() {
            if to < from {
                return Err(PointerViolation {
                    proposer: trace.proposers.get(n).copied().unwrap_or(n),
                    round: next.round,
                    from,
                    to,
                });
            }
        }
    }
    Ok(())
}

/// Fog nodes propose their capacity to DSOs in descending order of their
/// DSO weights; each DSO demands its subscribers' total purchase and ranks
/// fog nodes by ascending rent.
pub fn build_dso_fn_sides<T: Scalar>(
    scenario: &Scenario<T>,
    pricing: &PricingResult<T>,
) -> (MatchSide<T>, MatchSide<T>) {
    let fns = MatchSide::new(
        scenario.fns.iter().map(|f| f.id).collect(),
        scenario.fns.iter().map(|f| f.capacity).collect(),
        scenario
            .fns
            .iter()
            .map(|f| PreferenceList::from_keys(f.dso_weights.iter().copied().enumerate(), Rank::Descending))
            .collect(),
    );

    let mut demand = vec![T::zero(); scenario.dsos.len()];
    for (j, dss) in scenario.dsss.iter().enumerate() {
        if !pricing.participating[j] {
            continue;
        }
        if let Some(i) = dss.dso_pref.top() {
            demand[i] = demand[i] + pricing.purchases[j];
        }
    }
    let by_rent = PreferenceList::from_keys(scenario.fns.iter().map(|f| (f.id, f.rent)), Rank::Ascending);
    let dsos = MatchSide::new(scenario.dsos.iter().map(|d| d.id).collect(), demand, vec![by_rent; scenario.dsos.len()]);
    (fns, dsos)
}

/// The sub-market inside one DSO: its participating subscribers propose
/// their purchases to the fog nodes it rented from, ranked by ascending
/// rent; each fog node offers what it rented to this DSO and ranks DSSs by
/// ascending distance. `dso_fn` is keyed `(DSO id, FN id)`.
pub fn build_fn_dss_sides<T: Scalar>(
    scenario: &Scenario<T>,
    dso_id: usize,
    dso_fn: &Allocation<T>,
    pricing: &PricingResult<T>,
) -> (MatchSide<T>, MatchSide<T>) {
    let paired: Vec<(usize, T)> = dso_fn.iter().filter(|&(i, _, _)| i == dso_id).map(|(_, k, q)| (k, q)).collect();
    let served: Vec<usize> = scenario
        .dsss
        .iter()
        .enumerate()
        .filter(|(j, d)| pricing.participating[*j] && d.dso_pref.top() == Some(dso_id))
        .map(|(j, _)| j)
        .collect();

    let by_rent = PreferenceList::from_keys(paired.iter().map(|&(k, _)| (k, scenario.fns[k].rent)), Rank::Ascending);
    let dsss = MatchSide::new(
        served.clone(),
        served.iter().map(|&j| pricing.purchases[j]).collect(),
        vec![by_rent; served.len()],
    );
    let fns = MatchSide::new(
        paired.iter().map(|&(k, _)| k).collect(),
        paired.iter().map(|&(_, q)| q).collect(),
        paired
            .iter()
            .map(|&(k, _)| {
                PreferenceList::from_keys(served.iter().map(|&j| (j, scenario.fn_dss_distance(k, j))), Rank::Ascending)
            })
            .collect(),
    );
    (dsss, fns)
}

impl<T: Scalar> MatchSide<T> {
    /// Quantity of agent `id`, zero if it is not on this side.
    pub fn quantity_of(&self, id: usize) -> T {
        self.position_of(id).map_or_else(T::zero, |n| self.quantity[n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DsoAgent, DssAgent, FogNodeAgent, Point};

    fn side(agents: Vec<usize>, quantity: Vec<f64>, prefs: Vec<Vec<usize>>) -> MatchSide<f64> {
        MatchSide::new(agents, quantity, prefs.into_iter().map(PreferenceList::new).collect())
    }

    #[test]
    fn single_acceptor_takes_cheapest_first() {
        // A = proposer 0 (cheaper), B = proposer 1.
        let proposers = side(vec![0, 1], vec![6.0, 8.0], vec![vec![0], vec![0]]);
        let acceptors = side(vec![0], vec![10.0], vec![vec![0, 1]]);
        let (alloc, trace) = run_matching(&proposers, &acceptors);
        assert_eq!(alloc.get(0, 0), 6.0);
        assert!((alloc.get(1, 0) - 4.0).abs() < 1e-12);
        assert!(find_blocking_pair(&alloc, &proposers, &acceptors).is_none());
        assert!(assert_pointer_monotone(&trace).is_ok());
    }

    #[test]
    fn two_acceptor_hand_trace() {
        // FN1 = 0 (price 5), FN2 = 1 (price 3); both prefer d1 = 0.
        let proposers = side(vec![0, 1], vec![10.0, 10.0], vec![vec![0, 1], vec![0, 1]]);
        let acceptors = side(vec![0, 1], vec![10.0, 10.0], vec![vec![1, 0], vec![1, 0]]);
        let (alloc, trace) = run_matching(&proposers, &acceptors);
        assert_eq!(alloc.get(1, 0), 10.0);
        assert_eq!(alloc.get(0, 1), 10.0);
        assert_eq!(alloc.len(), 2);
        assert!(find_blocking_pair(&alloc, &proposers, &acceptors).is_none());
        // Round 1: both propose to d1, FN1 is rejected entirely.
        let r1: Vec<_> = trace.rows.iter().filter(|r| r.round == 1).collect();
        assert_eq!(r1.len(), 2);
        assert_eq!(r1.iter().find(|r| r.proposer == 0).unwrap().rejected, 10.0);
        assert_eq!(r1.iter().find(|r| r.proposer == 1).unwrap().accepted, 10.0);
        assert_eq!(trace.rounds(), 2);
        assert_eq!(trace.states.last().unwrap().pointers, vec![1, 0]);

        let mut swapped = Allocation::new();
        swapped.set(0, 0, 10.0);
        swapped.set(1, 1, 10.0);
        let bp = find_blocking_pair(&swapped, &proposers, &acceptors).unwrap();
        assert_eq!((bp.proposer, bp.acceptor), (1, 0));
        assert_eq!(bp.quantity, 10.0);
    }

    #[test]
    fn displaced_proposer_retries_its_pointed_acceptor() {
        // P0 first fills acceptor 0, then P1 (preferred by acceptor 0) displaces it.
        // P0 reaches acceptor 1 only after being rejected at 0.
        let proposers = side(vec![0, 1], vec![5.0, 5.0], vec![vec![0, 1], vec![1, 0]]);
        let acceptors = side(vec![0, 1], vec![5.0, 2.0], vec![vec![1, 0], vec![0, 1]]);
        let (alloc, trace) = run_matching(&proposers, &acceptors);
        assert!(find_blocking_pair(&alloc, &proposers, &acceptors).is_none());
        assert!(assert_pointer_monotone(&trace).is_ok());
        assert!(trace.rows.iter().any(|r| r.offered == 0.0 && r.flag));
        assert!((alloc.total() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sides() {
        let acceptors = side(vec![0], vec![10.0], vec![vec![]]);
        let (alloc, trace) = run_matching(&MatchSide::empty(), &acceptors);
        assert!(alloc.is_empty());
        assert_eq!(trace.rounds(), 0);
        assert!(find_blocking_pair(&alloc, &MatchSide::empty(), &acceptors).is_none());
        let zero = side(vec![0], vec![0.0], vec![vec![0]]);
        assert!(find_blocking_pair(&Allocation::new(), &zero, &zero).is_none());
        assert!(assert_pointer_monotone(&MatchTrace::<f64>::default()).is_ok());
    }

    #[test]
    fn unacceptable_partners_are_never_matched() {
        let proposers = side(vec![0, 1], vec![4.0, 4.0], vec![vec![0], vec![0]]);
        let acceptors = side(vec![0], vec![10.0], vec![vec![1]]);
        let (alloc, _) = run_matching(&proposers, &acceptors);
        assert_eq!(alloc.get(0, 0), 0.0);
        assert_eq!(alloc.get(1, 0), 4.0);
        assert!(find_blocking_pair(&alloc, &proposers, &acceptors).is_none());
    }

    #[test]
    fn backwards_pointer_is_reported() {
        let state = |round, p: usize| MatchState::<f64> {
            round,
            pointers: vec![0, p],
            flags: vec![false, false],
            allocation: Allocation::new(),
        };
        let trace = MatchTrace { proposers: vec![4, 7], states: vec![state(0, 3), state(1, 2)], rows: vec![] };
        let v = assert_pointer_monotone(&trace).unwrap_err();
        assert_eq!(v, PointerViolation { proposer: 7, round: 1, from: 3, to: 2 });
        assert!(v.to_string().contains("proposer 7"));
    }

    #[test]
    fn generic_engine_runs_in_f32() {
        let proposers = MatchSide::<f32>::new(
            vec![0, 1],
            vec![6.0, 8.0],
            vec![PreferenceList::new(vec![0]), PreferenceList::new(vec![0])],
        );
        let acceptors = MatchSide::<f32>::new(vec![0], vec![10.0], vec![PreferenceList::new(vec![0, 1])]);
        let (alloc, _) = run_matching(&proposers, &acceptors);
        assert!((alloc.get(1, 0) - 4.0).abs() < 1e-5);
    }

    fn scenario() -> Scenario<f64> {
        let dss = |id, x: f64, y: f64| DssAgent {
            id,
            position: Point::new(x, y),
            arrival_rate: 0.5,
            alpha: 50.0,
            beta: 0.01,
            gamma: 0.001,
            dso_pref: PreferenceList::new(vec![0, 1]),
        };
        let fog = |id, rent, weights: Vec<f64>| FogNodeAgent {
            id,
            position: Point::new(0.0, 0.0),
            rent,
            capacity: 10.0,
            dso_weights: weights,
        };
        Scenario {
            mu: 0.1,
            t_th: 60.0,
            theta: 0.02,
            kappa: 0.1,
            cloud_distance: 100.0,
            seed: 0,
            dsss: vec![dss(0, 1.0, 0.0), dss(1, 0.0, 3.0)],
            dsos: (0..2).map(|id| DsoAgent { id, cloud_unit_cost: 10.0, price: None }).collect(),
            fns: vec![fog(0, 2.0, vec![0.1, 0.9]), fog(1, 2.0, vec![0.5, 0.5]), fog(2, 1.0, vec![0.3, 0.2])],
        }
    }

    #[test]
    fn dso_fn_sides_rank_by_weight_and_rent() {
        let s = scenario();
        let pricing =
            PricingResult { prices: vec![12.1, 0.0], purchases: vec![5.4545, 5.4545], participating: vec![true, true] };
        let (fns, dsos) = build_dso_fn_sides(&s, &pricing);
        assert_eq!(fns.prefs[0].as_slice(), &[1, 0]);
        // equal weights fall back to id order
        assert_eq!(fns.prefs[1].as_slice(), &[0, 1]);
        assert_eq!(fns.quantity, vec![10.0, 10.0, 10.0]);
        assert_eq!(dsos.prefs[0].as_slice(), &[2, 0, 1]);
        assert!((dsos.quantity[0] - 10.9090).abs() < 1e-9);
        assert_eq!(dsos.quantity[1], 0.0);
    }

    #[test]
    fn fn_dss_sides_use_rented_quota_and_distance() {
        let s = scenario();
        let pricing =
            PricingResult { prices: vec![12.1, 0.0], purchases: vec![5.0, 6.0], participating: vec![true, true] };
        let mut dso_fn = Allocation::new();
        dso_fn.set(0, 1, 4.0);
        dso_fn.set(0, 2, 3.0);
        dso_fn.set(1, 0, 9.0);
        let (dsss, fns) = build_fn_dss_sides(&s, 0, &dso_fn, &pricing);
        assert_eq!(dsss.agents, vec![0, 1]);
        assert_eq!(dsss.quantity, vec![5.0, 6.0]);
        assert_eq!(dsss.prefs[0].as_slice(), &[2, 1]);
        assert_eq!(fns.agents, vec![1, 2]);
        assert_eq!(fns.quantity, vec![4.0, 3.0]);
        // FN at the origin: DSS 0 at distance 1, DSS 1 at distance 3
        assert_eq!(fns.prefs[0].as_slice(), &[0, 1]);
        assert_eq!(fns.quantity_of(2), 3.0);
        assert_eq!(fns.quantity_of(0), 0.0);
    }
}
