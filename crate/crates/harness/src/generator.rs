//! Random scenarios on a circular district.

use std::f64::consts::PI;

use fogmarket_core::{DsoAgent, DssAgent, FogNodeAgent, Point, PreferenceList, Scenario};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Arrival rates are clipped to this fraction of `mu * t_th`. Any value
/// below 1 keeps the delay bound satisfiable; 0.9 keeps the minimum purchase
/// of the clipped subscribers within 10x of their arrival rate / mu.
pub const LAMBDA_CLIP_FRACTION: f64 = 0.9;

// Each agent tier draws from its own ChaCha stream, so changing the size of
// one population leaves the draws of the others unchanged.
const DSS_STREAM: u64 = 1;
const FN_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_dss: usize,
    pub n_dso: usize,
    pub n_fn: usize,
    /// km
    pub district_diameter: f64,
    pub mu: f64,
    pub t_th: f64,
    /// Mean arrival rate before clipping, jobs per ms.
    pub lambda_mean: f64,
    pub rent_range: (f64, f64),
    pub capacity_range: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub kappa: f64,
    pub cloud_distance: f64,
    pub cloud_unit_cost: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_dss: 120,
            n_dso: 4,
            n_fn: 20,
            district_diameter: 10.0,
            mu: 0.1,
            t_th: 60.0,
            lambda_mean: 0.5,
            rent_range: (0.0, 10.0),
            capacity_range: (0.0, 100.0),
            alpha: 50.0,
            beta: 0.01,
            gamma: 0.001,
            theta: 1.0 / 50.0,
            kappa: 0.1,
            cloud_distance: 100.0,
            cloud_unit_cost: 10.0,
            seed: 42,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let positive = [
            ("district_diameter", self.district_diameter),
            ("mu", self.mu),
            ("t_th", self.t_th),
            ("lambda_mean", self.lambda_mean),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let non_negative = [
            ("theta", self.theta),
            ("kappa", self.kappa),
            ("cloud_distance", self.cloud_distance),
            ("cloud_unit_cost", self.cloud_unit_cost),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        for (name, (lo, hi)) in [("rent_range", self.rent_range), ("capacity_range", self.capacity_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                bad.push(format!("{name} must satisfy 0 <= lo < hi, got ({lo}, {hi})"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Params(bad.join("; ")))
        }
    }

    /// Largest arrival rate the generator will emit.
    pub fn lambda_ceiling(&self) -> f64 {
        LAMBDA_CLIP_FRACTION * self.mu * self.t_th
    }
}

/// A generated scenario and how many arrival rates had to be clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub scenario: Scenario,
    pub clipped: usize,
}

pub fn generate_scenario(params: &GeneratorParams) -> Result<Scenario> {
    generate(params).map(|g| g.scenario)
}

pub fn generate(params: &GeneratorParams) -> Result<Generated> {
    params.validate()?;
    let radius = params.district_diameter / 2.0;
    let ceiling = params.lambda_ceiling();

    let mut rng = stream(params.seed, DSS_STREAM);
    let mut clipped = 0;
    let mut dsss = Vec::with_capacity(params.n_dss);
    for id in 0..params.n_dss {
        let position = point_in_disk(&mut rng, radius);
        // U(0, 2m], so the rate is never zero.
        let mut lambda = 2.0 * params.lambda_mean * (1.0 - rng.gen::<f64>());
        if lambda > ceiling {
            lambda = ceiling;
            clipped += 1;
        }
        let mut order: Vec<usize> = (0..params.n_dso).collect();
        order.shuffle(&mut rng);
        dsss.push(DssAgent {
            id,
            position,
            arrival_rate: lambda,
            alpha: params.alpha,
            beta: params.beta,
            gamma: params.gamma,
            dso_pref: PreferenceList::new(order),
        });
    }
    if clipped > 0 {
        log::info!("seed {}: clipped {clipped} of {} arrival rates to {ceiling}", params.seed, params.n_dss);
    }

    let dsos =
        (0..params.n_dso).map(|id| DsoAgent { id, cloud_unit_cost: params.cloud_unit_cost, price: None }).collect();

    let mut rng = stream(params.seed, FN_STREAM);
    let (rent_lo, rent_hi) = params.rent_range;
    let (cap_lo, cap_hi) = params.capacity_range;
    let fns = (0..params.n_fn)
        .map(|id| {
            let position = point_in_disk(&mut rng, radius);
            let rent = rng.gen_range(rent_lo..rent_hi);
            let capacity = rng.gen_range(cap_lo..cap_hi);
            let dso_weights = (0..params.n_dso).map(|_| rng.gen::<f64>()).collect();
            FogNodeAgent { id, position, rent, capacity, dso_weights }
        })
        .collect();

    let scenario = Scenario::new(
        params.mu,
        params.t_th,
        params.theta,
        params.kappa,
        params.cloud_distance,
        params.seed,
        dsss,
        dsos,
        fns,
    )?;
    Ok(Generated { scenario, clipped })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform on the disk of the given radius centred at the origin.
fn point_in_disk<R: Rng>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let angle = 2.0 * PI * rng.gen::<f64>();
    Point::new(r * angle.cos(), r * angle.sin())
}
