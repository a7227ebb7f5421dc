#![allow(dead_code)]

use fogmarket_core::{MarketOutcome, Scenario};

/// Maximises a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

/// Purchase maximising `alpha*lambda - beta*price*q - gamma*(queueing + network)`
/// found numerically. Only the terms that depend on `q` are kept.
pub fn numeric_best_purchase(lambda: f64, mu: f64, price: f64, beta: f64, gamma: f64) -> f64 {
    let floor = lambda / mu;
    let f = |q: f64| -beta * price * q - gamma * lambda / (mu - lambda / q);
    let mut hi = 2.0 * floor;
    while f(2.0 * hi) > f(hi) {
        hi *= 2.0;
    }
    golden_section_max(f, floor * (1.0 + 1e-12), 2.0 * hi, 300)
}

/// Checks the market invariants and returns the first violation found.
pub fn check_market_invariants(s: &Scenario, o: &MarketOutcome) -> Result<(), String> {
    for i in 0..s.dsos.len() {
        let demand: f64 = (0..s.dsss.len())
            .filter(|&j| o.participating[j] && o.subscription[j] == Some(i))
            .map(|j| o.purchases[j])
            .sum();
        let supplied = o.dso_fn.row_sum(i) + o.dso_fn.cloud(i);
        if (supplied - demand).abs() > 1e-6 {
            return Err(format!("demand: DSO {i} demand {demand} supplied {supplied}"));
        }

        let mut cloud_of_members = 0.0;
        for j in (0..s.dsss.len()).filter(|&j| o.participating[j] && o.subscription[j] == Some(i)) {
            let from_fns: f64 = o.fn_dss.iter().filter(|&(_, c, _)| c == j).map(|(_, _, q)| q).sum();
            if from_fns > o.purchases[j] + 1e-6 {
                return Err(format!("fill: DSS {j} gets {from_fns} from FNs but bought {}", o.purchases[j]));
            }
            cloud_of_members += o.purchases[j] - from_fns;
        }
        if (cloud_of_members - o.dso_fn.cloud(i)).abs() > 1e-6 {
            return Err(format!(
                "fill: DSO {i} members' unserved demand {cloud_of_members} vs cloud {}",
                o.dso_fn.cloud(i)
            ));
        }

        for k in 0..s.fns.len() {
            let used: f64 =
                o.fn_dss.iter().filter(|&(f, j, _)| f == k && o.subscription[j] == Some(i)).map(|(_, _, q)| q).sum();
            if used > o.dso_fn.get(i, k) + 1e-9 {
                return Err(format!("sub-market: FN {k} serves {used} for DSO {i} but rented {}", o.dso_fn.get(i, k)));
            }
        }
    }
    for (k, f) in s.fns.iter().enumerate() {
        let rented = o.dso_fn.col_sum(k);
        if rented > f.capacity + 1e-9 {
            return Err(format!("capacity: FN {k} rents {rented} of {}", f.capacity));
        }
    }
    for (j, d) in s.dsss.iter().enumerate() {
        if !o.participating[j] {
            continue;
        }
        let q = o.purchases[j];
        let delay = d.arrival_rate / (s.mu - d.arrival_rate / q);
        if !(delay > 0.0 && delay <= s.t_th + 1e-9) {
            return Err(format!("delay: DSS {j} queueing delay {delay} with bound {}", s.t_th));
        }
    }
    Ok(())
}
