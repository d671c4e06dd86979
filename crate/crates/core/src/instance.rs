//! Routing instances, the edge-variable layout, and configuration decoding.
//!
//! Edge variables are laid out row by row: all edges leaving node 0 in
//! ascending target order (skipping the self-loop), then node 1, and so on.
//! For `n = 4` that is `(0,1) (0,2) (0,3) (1,0) (1,2) ... (3,2)`.
//! A configuration index stores variable `t` in bit `t`, least significant
//! first, so the simulator's amplitude index and the decoded edge set use the
//! same integer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest variable count a [`Configuration`] index can hold.
pub const MAX_CONFIG_VARS: usize = 128;

/// A routing instance: `n` nodes with node 0 as the depot, `k` vehicles and a
/// dense `n x n` weight matrix with `weights[i][j]` the cost of edge `i -> j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<T = f64> {
    n: usize,
    k: usize,
    weights: Vec<T>,
}

impl<T: Scalar> ProblemInstance<T> {
    pub fn new(k: usize, weights: Vec<Vec<T>>) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::Domain(format!(
                "an instance needs at least 2 nodes, got {n}"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(Error::Malformed(format!("weight {i}->{j} is not finite")));
                }
                if w < T::zero() {
                    return Err(Error::NegativeWeight {
                        from: i,
                        to: j,
                        value: w.as_f64(),
                    });
                }
                if i == j && w != T::zero() {
                    return Err(Error::NonzeroDiagonal {
                        node: i,
                        value: w.as_f64(),
                    });
                }
                flat.push(w);
            }
        }
        if k < 1 || k > n - 1 {
            return Err(Error::VehicleCount { n, k, max: n - 1 });
        }
        Ok(Self {
            n,
            k,
            weights: flat,
        })
    }

    /// Node count, depot included.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Vehicle count.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of edge variables, `n (n - 1)`.
    pub fn num_vars(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[i * self.n + j]
    }

    pub fn max_weight(&self) -> T {
        self.weights.iter().copied().fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.weight(i, j) == self.weight(j, i)))
    }

    /// Weight of every edge variable in layout order.
    pub fn edge_weights(&self) -> Vec<T> {
        (0..self.num_vars())
            .map(|t| {
                let (i, j) = pair_unchecked(self.n, t);
                self.weight(i, j)
            })
            .collect()
    }

    pub fn var_index(&self, i: usize, j: usize) -> Result<usize> {
        var_index(self.n, i, j)
    }

    pub fn var_pair(&self, t: usize) -> Result<(usize, usize)> {
        var_pair(self.n, t)
    }

    /// Raw weighted edge sum of a configuration; feasibility is not required.
    pub fn route_cost(&self, config: &Configuration) -> T {
        debug_assert_eq!(config.n(), self.n);
        config
            .edges()
            .into_iter()
            .map(|(i, j)| self.weight(i, j))
            .sum()
    }

    /// Total cost of a set of depot routes given as node sequences.
    pub fn routes_cost(&self, routes: &[Vec<usize>]) -> T {
        routes
            .iter()
            .flat_map(|r| r.windows(2).map(|w| self.weight(w[0], w[1])))
            .sum()
    }

    pub fn classify(&self, config: &Configuration) -> RouteClassification {
        classify(config, self.k)
    }

    /// Converts to another scalar type through `f64`.
    pub fn cast<U: Scalar>(&self) -> ProblemInstance<U> {
        ProblemInstance {
            n: self.n,
            k: self.k,
            weights: self.weights.iter().map(|w| U::of(w.as_f64())).collect(),
        }
    }

    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            n: self.n,
            k: self.k,
            weights: (0..self.n)
                .map(|i| (0..self.n).map(|j| self.weight(i, j).as_f64()).collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        if doc.weights.len() != doc.n {
            return Err(Error::DimensionMismatch {
                expected: doc.n,
                found: doc.weights.len(),
            });
        }
        let weights = doc
            .weights
            .iter()
            .map(|row| row.iter().map(|&w| T::of(w)).collect())
            .collect();
        Self::new(doc.k, weights)
    }
}

/// On-disk instance format: `{"n": 4, "k": 2, "weights": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub n: usize,
    pub k: usize,
    pub weights: Vec<Vec<f64>>,
}

/// Parses and validates an instance document.
pub fn load_instance<T: Scalar>(text: &str) -> Result<ProblemInstance<T>> {
    let doc: InstanceDocument =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    ProblemInstance::from_document(&doc)
}

pub const PRESET_NAMES: [&str; 3] = ["vrp-4-2", "vrp-5-2", "vrp-5-3"];

const WEIGHTS_4_2: [[f64; 4]; 4] = [
    [0.0, 36.84, 5.06, 30.63],
    [36.84, 0.0, 24.55, 63.22],
    [5.06, 24.55, 0.0, 15.50],
    [30.63, 63.22, 15.50, 0.0],
];

const WEIGHTS_5_2: [[f64; 5]; 5] = [
    [0.0, 6.794, 61.653, 24.557, 47.767],
    [6.794, 0.0, 87.312, 47.262, 39.477],
    [61.653, 87.312, 0.0, 9.711, 42.887],
    [24.557, 47.262, 9.711, 0.0, 40.98],
    [47.767, 39.477, 42.887, 40.98, 0.0],
];

const WEIGHTS_5_3: [[f64; 5]; 5] = [
    [0.0, 12.138, 0.32, 7.2, 2.626],
    [12.138, 0.0, 16.307, 5.3, 17.021],
    [0.32, 16.307, 0.0, 9.309, 2.98],
    [7.2, 5.3, 9.309, 0.0, 16.759],
    [2.626, 17.021, 2.98, 16.759, 0.0],
];

/// Bundled instances: `vrp-4-2`, `vrp-5-2` and `vrp-5-3`.
pub fn preset<T: Scalar>(name: &str) -> Result<ProblemInstance<T>> {
    fn rows<T: Scalar, const N: usize>(m: &[[f64; N]; N]) -> Vec<Vec<T>> {
        m.iter()
            .map(|r| r.iter().map(|&w| T::of(w)).collect())
            .collect()
    }
    match name {
        "vrp-4-2" => ProblemInstance::new(2, rows(&WEIGHTS_4_2)),
        "vrp-5-2" => ProblemInstance::new(2, rows(&WEIGHTS_5_2)),
        "vrp-5-3" => ProblemInstance::new(3, rows(&WEIGHTS_5_3)),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Position of edge `i -> j` in the variable layout of an `n`-node instance.
pub fn var_index(n: usize, i: usize, j: usize) -> Result<usize> {
    if i >= n || j >= n {
        return Err(Error::Domain(format!(
            "edge {i}->{j} out of range for {n} nodes"
        )));
    }
    if i == j {
        return Err(Error::Domain(format!("self-loop {i}->{j} has no variable")));
    }
    Ok(i * (n - 1) + if j < i { j } else { j - 1 })
}

/// Inverse of [`var_index`].
pub fn var_pair(n: usize, t: usize) -> Result<(usize, usize)> {
    if n < 2 || t >= n * (n - 1) {
        return Err(Error::Domain(format!(
            "variable {t} out of range for {n} nodes"
        )));
    }
    Ok(pair_unchecked(n, t))
}

pub(crate) fn pair_unchecked(n: usize, t: usize) -> (usize, usize) {
    let i = t / (n - 1);
    let r = t % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// An assignment of all `n (n - 1)` edge variables, stored as its index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    n: usize,
    index: u128,
}

impl Configuration {
    pub fn new(n: usize, index: u128) -> Result<Self> {
        let vars = checked_vars(n)?;
        if vars < 128 && index >> vars != 0 {
            return Err(Error::Domain(format!(
                "index {index} needs more than {vars} bits"
            )));
        }
        Ok(Self { n, index })
    }

    pub fn from_bits(n: usize, bits: &[bool]) -> Result<Self> {
        let vars = checked_vars(n)?;
        if bits.len() != vars {
            return Err(Error::DimensionMismatch {
                expected: vars,
                found: bits.len(),
            });
        }
        let index = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0u128, |acc, (t, _)| acc | 1 << t);
        Ok(Self { n, index })
    }

    /// Builds the configuration whose set variables are exactly `edges`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        checked_vars(n)?;
        let mut index = 0u128;
        for &(i, j) in edges {
            index |= 1 << var_index(n, i, j)?;
        }
        Ok(Self { n, index })
    }

    /// Builds the configuration that drives each route `[0, a, b, ..., 0]`.
    pub fn from_routes(n: usize, routes: &[Vec<usize>]) -> Result<Self> {
        let edges: Vec<_> = routes
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn index(&self) -> u128 {
        self.index
    }

    pub fn bit(&self, t: usize) -> bool {
        t < self.num_vars() && self.index >> t & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.num_vars()).map(|t| self.bit(t)).collect()
    }

    /// Bits as a `0`/`1` string, variable 0 first.
    pub fn bitstring(&self) -> String {
        self.bits()
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Set edges `(i, j)` in layout order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_vars())
            .filter(|&t| self.bit(t))
            .map(|t| pair_unchecked(self.n, t))
            .collect()
    }

    /// Dense adjacency matrix; the diagonal is always `false`.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.n]; self.n];
        for (i, j) in self.edges() {
            adj[i][j] = true;
        }
        adj
    }

    /// Same edge set with every edge direction flipped.
    pub fn reversed(&self) -> Self {
        let edges: Vec<_> = self.edges().into_iter().map(|(i, j)| (j, i)).collect();
        Self::from_edges(self.n, &edges).expect("reversal keeps edges valid")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index)
    }
}

fn checked_vars(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 nodes, got {n}")));
    }
    let vars = n * (n - 1);
    if vars > MAX_CONFIG_VARS {
        return Err(Error::Resource {
            what: "configuration variable count",
            size: vars,
            limit: MAX_CONFIG_VARS,
        });
    }
    Ok(vars)
}

/// Decodes a configuration into its directed edge list.
pub fn decode(config: &Configuration) -> Vec<(usize, usize)> {
    config.edges()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityClass {
    DegreeInfeasible,
    /// Degree equations hold but some cycle never visits the depot.
    Subtour,
    RouteFeasible,
}

impl FeasibilityClass {
    pub fn is_degree_feasible(self) -> bool {
        !matches!(self, FeasibilityClass::DegreeInfeasible)
    }

    pub fn label(self) -> &'static str {
        match self {
            FeasibilityClass::DegreeInfeasible => "degree-infeasible",
            FeasibilityClass::Subtour => "degree-feasible-with-subtour",
            FeasibilityClass::RouteFeasible => "route-feasible",
        }
    }
}

impl fmt::Display for FeasibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Result of [`classify`]. Routes are depot cycles `[0, .., 0]`, subtours
/// are depot-free cycles written with the first node repeated at the end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteClassification {
    pub class: FeasibilityClass,
    pub routes: Vec<Vec<usize>>,
    pub subtours: Vec<Vec<usize>>,
}

/// Checks the in/out degree equations for `k` vehicles and, when they hold,
/// splits the edge set into depot routes and depot-free subtours.
pub fn classify(config: &Configuration, k: usize) -> RouteClassification {
    let n = config.n();
    let mut out_deg = vec![0usize; n];
    let mut in_deg = vec![0usize; n];
    let mut succ = vec![usize::MAX; n];
    let mut depot_targets = Vec::new();
    for (i, j) in config.edges() {
        out_deg[i] += 1;
        in_deg[j] += 1;
        if i == 0 {
            depot_targets.push(j);
        } else {
            succ[i] = j;
        }
    }
    let degree_ok =
        out_deg[0] == k && in_deg[0] == k && (1..n).all(|i| out_deg[i] == 1 && in_deg[i] == 1);
    if !degree_ok {
        return RouteClassification {
            class: FeasibilityClass::DegreeInfeasible,
            routes: Vec::new(),
            subtours: Vec::new(),
        };
    }

    // Unit in-degree on every location means a walk from the depot cannot
    // enter a depot-free cycle, so each walk ends back at node 0.
    let mut visited = vec![false; n];
    let mut routes = Vec::with_capacity(k);
    for &start in &depot_targets {
        let mut route = vec![0, start];
        let mut cur = start;
        while cur != 0 {
            visited[cur] = true;
            cur = succ[cur];
            route.push(cur);
        }
        routes.push(route);
    }
    let mut subtours = Vec::new();
    for start in 1..n {
        if visited[start] {
            continue;
        }
        let mut cycle = vec![start];
        let mut cur = start;
        loop {
            visited[cur] = true;
            cur = succ[cur];
            cycle.push(cur);
            if cur == start {
                break;
            }
        }
        subtours.push(cycle);
    }
    let class = if subtours.is_empty() {
        FeasibilityClass::RouteFeasible
    } else {
        FeasibilityClass::Subtour
    };
    RouteClassification {
        class,
        routes,
        subtours,
    }
}
