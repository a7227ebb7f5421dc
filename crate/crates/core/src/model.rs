//! Domain types shared by the pricing, matching and market stages.
//!
//! Agents are identified by their index in the owning list of the
//! [`Scenario`]: DSS `j` is `scenario.dsss[j]`, DSO `i` is `scenario.dsos[i]`,
//! fog node `k` is `scenario.fns[k]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{cmp_finite, Scalar};

/// Planar position in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance in km.
pub fn distance<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Strict ranking of agent ids, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceList(Vec<usize>);

/// Direction in which keys are ranked by [`PreferenceList::from_keys`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    /// Smallest key first.
    Ascending,
    /// Largest key first.
    Descending,
}

impl PreferenceList {
    pub fn new(order: Vec<usize>) -> Self {
        Self(order)
    }

    /// Ranks `(id, key)` pairs by key; equal keys are ordered by ascending id.
    pub fn from_keys<T, I>(keys: I, rank: Rank) -> Self
    where
        T: Scalar,
        I: IntoIterator<Item = (usize, T)>,
    {
        let mut keyed: Vec<(usize, T)> = keys.into_iter().collect();
        keyed.sort_by(|a, b| {
            let by_key = match rank {
                Rank::Ascending => cmp_finite(a.1, b.1),
                Rank::Descending => cmp_finite(b.1, a.1),
            };
            by_key.then(a.0.cmp(&b.0))
        });
        Self(keyed.into_iter().map(|(id, _)| id).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn get(&self, position: usize) -> Option<usize> {
        self.0.get(position).copied()
    }

    /// Position of `id` in the list (0 is most preferred).
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.0.iter().position(|&x| x == id)
    }

    /// True iff the list contains each of `0..n` exactly once.
    pub fn is_permutation_of(&self, n: usize) -> bool {
        if self.0.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &id in &self.0 {
            if id >= n || seen[id] {
                return false;
            }
            seen[id] = true;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DssAgent<T> {
    pub id: usize,
    pub position: Point<T>,
    /// Workload arrival rate λ, jobs per ms.
    pub arrival_rate: T,
    /// Revenue weight per unit of workload.
    pub alpha: T,
    /// Payment weight.
    pub beta: T,
    /// Delay-cost weight.
    pub gamma: T,
    /// Ranking over DSO ids.
    pub dso_pref: PreferenceList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DsoAgent<T> {
    pub id: usize,
    /// Per-CRB cost of serving demand from the remote data center.
    pub cloud_unit_cost: T,
    /// Service price; unset until the pricing stage runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FogNodeAgent<T> {
    pub id: usize,
    pub position: Point<T>,
    /// Rent per CRB.
    pub rent: T,
    /// CRBs available for rent.
    pub capacity: T,
    /// Preference weight towards each DSO, indexed by DSO id, in `[0, 1]`.
    pub dso_weights: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scenario<T> {
    /// Service rate of one CRB, jobs per ms.
    pub mu: T,
    /// Delay tolerance, ms.
    pub t_th: T,
    /// Network delay per km, ms/km.
    pub theta: T,
    /// Transmission cost per CRB·km.
    pub kappa: T,
    /// Distance used for demand served by the remote data center, km.
    pub cloud_distance: T,
    pub seed: u64,
    pub dsss: Vec<DssAgent<T>>,
    pub dsos: Vec<DsoAgent<T>>,
    pub fns: Vec<FogNodeAgent<T>>,
}

/// A broken scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositive { field: &'static str },
    Negative { field: &'static str },
    DelayBoundUnsatisfiable { dss: usize },
    DssParameter { dss: usize, field: &'static str },
    DssPreference { dss: usize },
    DsoParameter { dso: usize, field: &'static str },
    FogNodeParameter { fog_node: usize, field: &'static str },
    FogNodeWeights { fog_node: usize },
    IdMismatch { tier: &'static str, index: usize, id: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive { field } => write!(f, "{field} must be positive and finite"),
            Violation::Negative { field } => write!(f, "{field} must be non-negative and finite"),
            Violation::DelayBoundUnsatisfiable { dss } => {
                write!(f, "delay bound unsatisfiable for DSS {dss} (arrival rate >= mu * t_th)")
            }
            Violation::DssParameter { dss, field } => write!(f, "DSS {dss}: invalid {field}"),
            Violation::DssPreference { dss } => {
                write!(f, "DSS {dss}: dso_pref is not a permutation of all DSO ids")
            }
            Violation::DsoParameter { dso, field } => write!(f, "DSO {dso}: invalid {field}"),
            Violation::FogNodeParameter { fog_node, field } => {
                write!(f, "FN {fog_node}: invalid {field}")
            }
            Violation::FogNodeWeights { fog_node } => {
                write!(f, "FN {fog_node}: dso_weights must hold one value in [0, 1] per DSO")
            }
            Violation::IdMismatch { tier, index, id } => {
                write!(f, "{tier} at index {index} has id {id}")
            }
        }
    }
}

fn positive<T: Scalar>(v: T) -> bool {
    v.is_finite() && v > T::zero()
}

fn non_negative<T: Scalar>(v: T) -> bool {
    v.is_finite() && v >= T::zero()
}

/// Collects every broken invariant; an empty result means the scenario is valid.
pub fn validate_scenario<T: Scalar>(s: &Scenario<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    if !positive(s.mu) {
        out.push(Violation::NonPositive { field: "mu" });
    }
    if !positive(s.t_th) {
        out.push(Violation::NonPositive { field: "t_th" });
    }
    for (field, v) in [("theta", s.theta), ("kappa", s.kappa), ("cloud_distance", s.cloud_distance)] {
        if !non_negative(v) {
            out.push(Violation::Negative { field });
        }
    }
    let capacity = s.mu * s.t_th;
    let m = s.dsos.len();

    for (index, d) in s.dsss.iter().enumerate() {
        if d.id != index {
            out.push(Violation::IdMismatch { tier: "DSS", index, id: d.id });
        }
        if !d.position.is_finite() {
            out.push(Violation::DssParameter { dss: index, field: "position" });
        }
        for (field, v) in [("arrival_rate", d.arrival_rate), ("alpha", d.alpha), ("beta", d.beta), ("gamma", d.gamma)] {
            if !positive(v) {
                out.push(Violation::DssParameter { dss: index, field });
            }
        }
        if d.arrival_rate.is_finite() && capacity.is_finite() && d.arrival_rate >= capacity {
            out.push(Violation::DelayBoundUnsatisfiable { dss: index });
        }
        if !d.dso_pref.is_permutation_of(m) {
            out.push(Violation::DssPreference { dss: index });
        }
    }

    for (index, d) in s.dsos.iter().enumerate() {
        if d.id != index {
            out.push(Violation::IdMismatch { tier: "DSO", index, id: d.id });
        }
        if !non_negative(d.cloud_unit_cost) {
            out.push(Violation::DsoParameter { dso: index, field: "cloud_unit_cost" });
        }
        if let Some(price) = d.price {
            if !non_negative(price) {
                out.push(Violation::DsoParameter { dso: index, field: "price" });
            }
        }
    }

    for (index, f) in s.fns.iter().enumerate() {
        if f.id != index {
            out.push(Violation::IdMismatch { tier: "FN", index, id: f.id });
        }
        if !f.position.is_finite() {
            out.push(Violation::FogNodeParameter { fog_node: index, field: "position" });
        }
        if !non_negative(f.rent) {
            out.push(Violation::FogNodeParameter { fog_node: index, field: "rent" });
        }
        if !non_negative(f.capacity) {
            out.push(Violation::FogNodeParameter { fog_node: index, field: "capacity" });
        }
        let weights_ok =
            f.dso_weights.len() == m && f.dso_weights.iter().all(|&w| w.is_finite() && w >= T::zero() && w <= T::one());
        if !weights_ok {
            out.push(Violation::FogNodeWeights { fog_node: index });
        }
    }
    out
}

impl<T: Scalar> Scenario<T> {
    /// Builds a scenario, rejecting it if any invariant is broken.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: T,
        t_th: T,
        theta: T,
        kappa: T,
        cloud_distance: T,
        seed: u64,
        dsss: Vec<DssAgent<T>>,
        dsos: Vec<DsoAgent<T>>,
        fns: Vec<FogNodeAgent<T>>,
    ) -> Result<Self> {
        let s = Self { mu, t_th, theta, kappa, cloud_distance, seed, dsss, dsos, fns };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_scenario(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(violations))
        }
    }

    /// Distance `l_kj` between fog node `k` and DSS `j` (sensors sit at the DSS).
    pub fn fn_dss_distance(&self, k: usize, j: usize) -> T {
        distance(self.fns[k].position, self.dsss[j].position)
    }

    /// Largest distance between any two DSS or fog-node positions.
    pub fn district_diameter(&self) -> T {
        let points: Vec<Point<T>> =
            self.dsss.iter().map(|d| d.position).chain(self.fns.iter().map(|f| f.position)).collect();
        let mut best = T::zero();
        for (a, &p) in points.iter().enumerate() {
            for &q in &points[a + 1..] {
                best = best.max(distance(p, q));
            }
        }
        best
    }
}

/// Sparse non-negative CRB quantities between two tiers, plus per-row cloud amounts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation<T> {
    entries: BTreeMap<(usize, usize), T>,
    cloud: BTreeMap<usize, T>,
}

impl<T: Scalar> Allocation<T> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new(), cloud: BTreeMap::new() }
    }

    /// Sets the quantity for `(row, col)`; sub-tolerance values remove the entry.
    pub fn set(&mut self, row: usize, col: usize, quantity: T) {
        if quantity > T::tolerance() {
            self.entries.insert((row, col), quantity);
        } else {
            self.entries.remove(&(row, col));
        }
    }

    pub fn add(&mut self, row: usize, col: usize, quantity: T) {
        let current = self.get(row, col);
        self.set(row, col, current + quantity);
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries.get(&(row, col)).copied().unwrap_or_else(T::zero)
    }

    pub fn set_cloud(&mut self, row: usize, quantity: T) {
        if quantity > T::tolerance() {
            self.cloud.insert(row, quantity);
        } else {
            self.cloud.remove(&row);
        }
    }

    pub fn cloud(&self, row: usize) -> T {
        self.cloud.get(&row).copied().unwrap_or_else(T::zero)
    }

    /// `(row, col, quantity)` triples in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().map(|(&(r, c), &q)| (r, c, q))
    }

    pub fn cloud_iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.cloud.iter().map(|(&r, &q)| (r, q))
    }

    pub fn row_sum(&self, row: usize) -> T {
        self.entries.range((row, 0)..=(row, usize::MAX)).map(|(_, &q)| q).fold(T::zero(), |a, b| a + b)
    }

    pub fn col_sum(&self, col: usize) -> T {
        self.entries.iter().filter(|(&(_, c), _)| c == col).map(|(_, &q)| q).fold(T::zero(), |a, b| a + b)
    }

    pub fn total(&self) -> T {
        self.entries.values().copied().fold(T::zero(), |a, b| a + b)
    }

    pub fn cloud_total(&self) -> T {
        self.cloud.values().copied().fold(T::zero(), |a, b| a + b)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.cloud.is_empty()
    }

    /// Swaps rows and columns of the entries; cloud amounts are dropped.
    pub fn transposed(&self) -> Self {
        Self { entries: self.entries.iter().map(|(&(r, c), &q)| ((c, r), q)).collect(), cloud: BTreeMap::new() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct AllocationRepr<T> {
    entries: Vec<(usize, usize, T)>,
    #[serde(default)]
    cloud: Vec<(usize, T)>,
}

impl<T: Scalar> Serialize for Allocation<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AllocationRepr { entries: self.iter().collect(), cloud: self.cloud_iter().collect() }.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Allocation<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = AllocationRepr::<T>::deserialize(deserializer)?;
        let mut out = Allocation::new();
        for (r, c, q) in repr.entries {
            if !q.is_finite() || q < T::zero() {
                return Err(serde::de::Error::custom("negative or non-finite allocation entry"));
            }
            out.set(r, c, q);
        }
        for (r, q) in repr.cloud {
            if !q.is_finite() || q < T::zero() {
                return Err(serde::de::Error::custom("negative or non-finite cloud entry"));
            }
            out.set_cloud(r, q);
        }
        Ok(out)
    }
}
