#![allow(dead_code)]

use fogmarket_core::matching::MatchSide;
use fogmarket_core::{PreferenceList, Rank};
use rand::seq::SliceRandom;
use rand::Rng;

/// Maximises a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (hi - lo) <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Utility `αλ − βqr − γ·o(q)` written out directly from the queueing model,
/// independent of the library's formulas.
pub fn follower_utility(lambda: f64, mu: f64, price: f64, beta: f64, gamma: f64, q: f64) -> f64 {
    let alpha = 50.0;
    let delay = lambda / (mu - lambda / q);
    alpha * lambda - beta * q * price - gamma * delay
}

/// Brute-force maximiser of the follower utility over `q > λ/μ`: expands
/// the bracket until the utility turns down, then runs golden-section search.
pub fn brute_force_purchase(lambda: f64, mu: f64, price: f64, beta: f64, gamma: f64) -> f64 {
    let f = |q: f64| follower_utility(lambda, mu, price, beta, gamma, q);
    let lo = lambda / mu * (1.0 + 1e-12);
    let mut hi = (lambda / mu).max(1e-9) * 2.0;
    while f(hi * 2.0) > f(hi) {
        hi *= 2.0;
    }
    golden_section_max(f, lo, hi * 2.0)
}

/// Random small market: quantities in (0, 20], complete strict preferences.
pub fn random_sides<R: Rng>(rng: &mut R, n_proposers: usize, n_acceptors: usize) -> (MatchSide<f64>, MatchSide<f64>) {
    let qty = |rng: &mut R| 20.0 - rng.gen_range(0.0..20.0);
    let perm = |rng: &mut R, n: usize| {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        PreferenceList::new(v)
    };
    let proposers = MatchSide::new(
        (0..n_proposers).collect(),
        (0..n_proposers).map(|_| qty(rng)).collect(),
        (0..n_proposers).map(|_| perm(rng, n_acceptors)).collect(),
    );
    let acceptors = MatchSide::new(
        (0..n_acceptors).collect(),
        (0..n_acceptors).map(|_| qty(rng)).collect(),
        (0..n_acceptors).map(|_| perm(rng, n_proposers)).collect(),
    );
    (proposers, acceptors)
}

/// Random market whose acceptors all share one ranking by a random key,
/// as in the rent-ordered DSO lists.
pub fn random_common_ranking_sides<R: Rng>(
    rng: &mut R,
    n_proposers: usize,
    n_acceptors: usize,
) -> (MatchSide<f64>, MatchSide<f64>) {
    let (proposers, mut acceptors) = random_sides(rng, n_proposers, n_acceptors);
    let rents: Vec<f64> = (0..n_proposers).map(|_| rng.gen_range(0.0..10.0)).collect();
    let shared = PreferenceList::from_keys(rents.into_iter().enumerate(), Rank::Ascending);
    acceptors.prefs = vec![shared; n_acceptors];
    (proposers, acceptors)
}

/// Random market whose proposers all share one ranking of the acceptors,
/// as in the rent-ordered DSS lists.
pub fn random_common_proposer_sides<R: Rng>(
    rng: &mut R,
    n_proposers: usize,
    n_acceptors: usize,
) -> (MatchSide<f64>, MatchSide<f64>) {
    let (mut proposers, acceptors) = random_sides(rng, n_proposers, n_acceptors);
    let rents: Vec<f64> = (0..n_acceptors).map(|_| rng.gen_range(0.0..10.0)).collect();
    let shared = PreferenceList::from_keys(rents.into_iter().enumerate(), Rank::Ascending);
    proposers.prefs = vec![shared; n_proposers];
    (proposers, acceptors)
}
