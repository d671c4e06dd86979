//! Classical ground truth by exhaustive search.
//!
//! Three independent routes to the answer:
//! - [`exhaustive_ground_state`] minimizes a QUBO over every assignment with a
//!   Gray-code sweep, one `O(N)` field update per step;
//! - [`degree_feasible_minimum`] scans every configuration for the degree
//!   equations using bit masks and minimizes the raw route cost;
//! - [`optimal_routes`] enumerates depot routes directly (permutations of the
//!   locations cut into `k` nonempty pieces).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::encoder::{IsingModel, QuboModel};
use crate::error::{Error, Result};
use crate::instance::{classify, var_pair, Configuration, FeasibilityClass, ProblemInstance};
use crate::scalar::Scalar;

/// Largest variable count swept exhaustively.
pub const MAX_EXHAUSTIVE_VARS: usize = 24;

/// Largest node count for route enumeration.
pub const MAX_ROUTE_NODES: usize = 9;

/// Energies within this absolute distance of the minimum are ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

const CHUNK_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBucket {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateReport<T = f64> {
    pub min_energy: T,
    /// Minimizing configuration indices, ascending.
    pub argmin: Vec<u64>,
    /// Feasibility class per argmin entry; empty until [`Self::with_classes`].
    pub classes: Vec<FeasibilityClass>,
    pub histogram: Option<Vec<HistogramBucket>>,
}

impl<T: Scalar> GroundStateReport<T> {
    pub fn with_classes(mut self, inst: &ProblemInstance<T>) -> Self {
        self.classes = self
            .argmin
            .iter()
            .map(|&z| {
                let c = Configuration::new(inst.n(), z as u128).expect("argmin fits the instance");
                classify(&c, inst.k()).class
            })
            .collect();
        self
    }
}

/// Models the exhaustive sweep accepts.
pub trait ExhaustiveModel<T: Scalar> {
    fn qubo(&self) -> std::borrow::Cow<'_, QuboModel<T>>;
}

impl<T: Scalar> ExhaustiveModel<T> for QuboModel<T> {
    fn qubo(&self) -> std::borrow::Cow<'_, QuboModel<T>> {
        std::borrow::Cow::Borrowed(self)
    }
}

impl<T: Scalar> ExhaustiveModel<T> for IsingModel<T> {
    fn qubo(&self) -> std::borrow::Cow<'_, QuboModel<T>> {
        std::borrow::Cow::Owned(self.to_qubo(T::zero()))
    }
}

fn guard(what: &'static str, size: usize, limit: usize) -> Result<()> {
    if size > limit {
        return Err(Error::Resource { what, size, limit });
    }
    Ok(())
}

/// Candidate minimizers of one Gray-code chunk `[start, end)`.
fn sweep_chunk<T: Scalar>(model: &QuboModel<T>, start: u64, end: u64) -> Vec<u64> {
    let n = model.num_vars();
    let mut z = start ^ (start >> 1);
    let mut energy = model.energy_index(z);
    let mut fields: Vec<T> = (0..n).map(|t| model.local_field(z, t)).collect();

    let window = |e: T| T::of(1e-6) * T::one().max(e.abs());
    let mut best = energy;
    let mut candidates = vec![z];

    for step in start + 1..end {
        let t = step.trailing_zeros() as usize;
        let turning_on = z >> t & 1 == 0;
        energy = if turning_on {
            energy + fields[t]
        } else {
            energy - fields[t]
        };
        z ^= 1 << t;
        for (s, f) in fields.iter_mut().enumerate() {
            if s != t {
                let q = model.quadratic(s, t);
                *f = if turning_on { *f + q } else { *f - q };
            }
        }
        if energy < best {
            best = energy;
            let w = window(best);
            candidates.retain(|&c| model.energy_index(c) <= best + w);
            candidates.push(z);
        } else if energy <= best + window(best) {
            candidates.push(z);
        }
    }
    candidates
}

/// Exact minimum and full argmin of a QUBO (or Ising) model.
///
/// The Gray-code energies only nominate candidates; the reported minimum and
/// ties are recomputed directly, so the result does not depend on how the
/// sweep is partitioned.
pub fn exhaustive_ground_state<T: Scalar, M: ExhaustiveModel<T>>(
    model: &M,
) -> Result<GroundStateReport<T>> {
    let model = model.qubo();
    let n = model.num_vars();
    guard("exhaustive sweep variable count", n, MAX_EXHAUSTIVE_VARS)?;
    let total = 1u64 << n;
    let chunk = 1u64 << CHUNK_BITS.min(n);
    let chunks: Vec<Vec<u64>> = (0..total / chunk)
        .into_par_iter()
        .map(|c| sweep_chunk(&model, c * chunk, (c + 1) * chunk))
        .collect();

    let mut candidates: Vec<(u64, T)> = chunks
        .into_iter()
        .flatten()
        .map(|z| (z, model.energy_index(z)))
        .collect();
    let min_energy = candidates
        .iter()
        .map(|&(_, e)| e)
        .fold(T::infinity(), T::min);
    let tie = T::of(TIE_TOLERANCE);
    candidates.retain(|&(_, e)| e - min_energy <= tie);
    let mut argmin: Vec<u64> = candidates.into_iter().map(|(z, _)| z).collect();
    argmin.sort_unstable();
    argmin.dedup();
    Ok(GroundStateReport {
        min_energy,
        argmin,
        classes: Vec::new(),
        histogram: None,
    })
}

/// Counts of all `2^N` energies in `buckets` equal-width bins over
/// `[min, max]`.
pub fn energy_histogram<T: Scalar>(
    model: &QuboModel<T>,
    buckets: usize,
) -> Result<Vec<HistogramBucket>> {
    let n = model.num_vars();
    guard("exhaustive sweep variable count", n, MAX_EXHAUSTIVE_VARS)?;
    let buckets = buckets.max(1);
    let energies: Vec<f64> = (0..1u64 << n)
        .into_par_iter()
        .map(|z| model.energy_index(z).as_f64())
        .collect();
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / buckets as f64
    } else {
        1.0
    };
    let mut counts = vec![0u64; buckets];
    for e in energies {
        let b = (((e - lo) / width) as usize).min(buckets - 1);
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBucket {
            lower: lo + b as f64 * width,
            upper: lo + (b + 1) as f64 * width,
            count,
        })
        .collect())
}

/// One optimal configuration with its depot routes.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteSolution {
    pub config: Configuration,
    pub routes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteOptimum<T = f64> {
    pub cost: T,
    /// Every optimal configuration (route reversals are distinct), ascending
    /// by index.
    pub solutions: Vec<RouteSolution>,
}

/// Minimum route cost over all ways to serve the locations with exactly `k`
/// depot routes.
pub fn optimal_routes<T: Scalar>(inst: &ProblemInstance<T>) -> Result<RouteOptimum<T>> {
    let n = inst.n();
    guard("route enumeration node count", n, MAX_ROUTE_NODES)?;
    let k = inst.k();
    let m = n - 1;
    let tie = T::of(TIE_TOLERANCE);

    let mut best = T::infinity();
    let mut found: BTreeMap<u128, Vec<Vec<usize>>> = BTreeMap::new();
    let mut perm: Vec<usize> = (1..n).collect();
    let mut cuts: Vec<usize> = Vec::with_capacity(k - 1);

    loop {
        // cut positions c_1 < .. < c_{k-1} in 1..m split perm into k pieces
        cuts.clear();
        cuts.extend(1..k);
        loop {
            let mut cost = T::zero();
            let mut prev = 0;
            for &end in cuts.iter().chain(std::iter::once(&m)) {
                let piece = &perm[prev..end];
                cost = cost + inst.weight(0, piece[0]) + inst.weight(piece[piece.len() - 1], 0);
                for w in piece.windows(2) {
                    cost = cost + inst.weight(w[0], w[1]);
                }
                prev = end;
            }
            if cost < best - tie {
                best = cost;
                found.clear();
            }
            if cost - best <= tie {
                let mut routes = Vec::with_capacity(k);
                let mut prev = 0;
                for &end in cuts.iter().chain(std::iter::once(&m)) {
                    let mut r = vec![0];
                    r.extend_from_slice(&perm[prev..end]);
                    r.push(0);
                    routes.push(r);
                    prev = end;
                }
                let config = Configuration::from_routes(n, &routes)?;
                found.entry(config.index()).or_insert(routes);
            }
            if !next_combination(&mut cuts, m) {
                break;
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }

    let solutions = found
        .into_keys()
        .map(|index| {
            let config = Configuration::new(n, index).expect("enumerated route fits");
            RouteSolution {
                routes: classify(&config, k).routes,
                config,
            }
        })
        .collect();
    Ok(RouteOptimum {
        cost: best,
        solutions,
    })
}

/// Advances `cuts` (strictly increasing values in `1..m`) to the next
/// combination in lexicographic order.
fn next_combination(cuts: &mut [usize], m: usize) -> bool {
    let r = cuts.len();
    for i in (0..r).rev() {
        // largest value position i may take is m - r + i
        if cuts[i] < m - r + i {
            cuts[i] += 1;
            for j in i + 1..r {
                cuts[j] = cuts[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeFeasibleMinimum<T = f64> {
    pub cost: T,
    /// Minimizing configurations, ascending by index.
    pub argmin: Vec<Configuration>,
}

/// Row and column masks over the variable layout, one per node.
fn degree_masks(n: usize) -> (Vec<u64>, Vec<u64>) {
    let mut out = vec![0u64; n];
    let mut inc = vec![0u64; n];
    for t in 0..n * (n - 1) {
        let (i, j) = var_pair(n, t).unwrap();
        out[i] |= 1 << t;
        inc[j] |= 1 << t;
    }
    (out, inc)
}

/// All configurations satisfying the in/out degree equations (subtours
/// allowed), ascending.
pub fn degree_feasible_configurations<T: Scalar>(inst: &ProblemInstance<T>) -> Result<Vec<u64>> {
    let vars = inst.num_vars();
    guard("exhaustive sweep variable count", vars, MAX_EXHAUSTIVE_VARS)?;
    let n = inst.n();
    let k = inst.k() as u32;
    let (out, inc) = degree_masks(n);
    let edges = (n - 1) as u32 + k;
    let total = 1u64 << vars;
    let chunk = 1u64 << CHUNK_BITS.min(vars);
    let parts: Vec<Vec<u64>> = (0..total / chunk)
        .into_par_iter()
        .map(|c| {
            (c * chunk..(c + 1) * chunk)
                .filter(|&z| {
                    z.count_ones() == edges
                        && (z & out[0]).count_ones() == k
                        && (z & inc[0]).count_ones() == k
                        && (1..n).all(|i| {
                            (z & out[i]).count_ones() == 1 && (z & inc[i]).count_ones() == 1
                        })
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Minimum raw route cost over degree-feasible configurations. For a
/// penalty above the feasibility threshold this is the QUBO ground-state
/// energy, subtours included.
pub fn degree_feasible_minimum<T: Scalar>(
    inst: &ProblemInstance<T>,
) -> Result<DegreeFeasibleMinimum<T>> {
    let n = inst.n();
    let feasible = degree_feasible_configurations(inst)?;
    let costed: Vec<(Configuration, T)> = feasible
        .into_iter()
        .map(|z| {
            let c = Configuration::new(n, z as u128).expect("swept index fits");
            (c, inst.route_cost(&c))
        })
        .collect();
    let cost = costed.iter().map(|&(_, e)| e).fold(T::infinity(), T::min);
    let tie = T::of(TIE_TOLERANCE);
    let argmin = costed
        .into_iter()
        .filter(|&(_, e)| e - cost <= tie)
        .map(|(c, _)| c)
        .collect();
    Ok(DegreeFeasibleMinimum { cost, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_qubo, default_penalty, qubo_to_ising};
    use crate::instance::preset;
    use crate::scalar::cost_matches;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(model: &QuboModel) -> (f64, Vec<u64>) {
        let n = model.num_vars();
        let energies: Vec<f64> = (0..1u64 << n)
            .map(|z| model.energy(&crate::encoder::bits_of(z, n)).unwrap())
            .collect();
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let arg = (0..1u64 << n)
            .filter(|&z| energies[z as usize] - min <= 1e-9)
            .collect();
        (min, arg)
    }

    #[test]
    fn ground_state_vrp_4_2() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        for a in [default_penalty(&inst), 437.0] {
            let model = build_qubo(&inst, a).unwrap();
            let report = exhaustive_ground_state(&model).unwrap().with_classes(&inst);
            assert!(cost_matches(report.min_energy, 124.871));
            assert_eq!(report.argmin, vec![779, 2125]);
            assert!(report
                .classes
                .iter()
                .all(|&c| c == FeasibilityClass::RouteFeasible));
        }
    }

    #[test]
    fn gray_sweep_matches_brute_force_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 3, 7, 10] {
            let q: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect())
                .collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect();
            let model = QuboModel::from_dense(&q, g, 0.5, 1.0).unwrap();
            let (min, arg) = brute_force(&model);
            let report = exhaustive_ground_state(&model).unwrap();
            assert!((report.min_energy - min).abs() < 1e-9);
            assert_eq!(report.argmin, arg);
        }
    }

    #[test]
    fn ising_input_gives_same_ground_state() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        let model = build_qubo(&inst, 300.0).unwrap();
        let a = exhaustive_ground_state(&model).unwrap();
        let b = exhaustive_ground_state(&qubo_to_ising(&model)).unwrap();
        assert_eq!(a.argmin, b.argmin);
        assert!((a.min_energy - b.min_energy).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_ground_states_are_degree_feasible_set() {
        let inst = ProblemInstance::new(2, vec![vec![0.0; 4]; 4]).unwrap();
        let model = build_qubo(&inst, default_penalty(&inst)).unwrap();
        let report = exhaustive_ground_state(&model).unwrap();
        assert_eq!(report.min_energy, 0.0);
        assert_eq!(
            report.argmin,
            degree_feasible_configurations(&inst).unwrap()
        );
        assert_eq!(degree_feasible_minimum(&inst).unwrap().cost, 0.0);
    }

    #[test]
    fn oversized_models_rejected() {
        let model = QuboModel::<f64>::zeros(25, 1.0);
        assert!(exhaustive_ground_state(&model).unwrap_err().is_resource());
        let big = ProblemInstance::new(1, vec![vec![0.0; 10]; 10]).unwrap();
        assert!(optimal_routes(&big).unwrap_err().is_resource());
        let six = ProblemInstance::new(1, vec![vec![0.0; 6]; 6]).unwrap();
        assert!(degree_feasible_minimum(&six).unwrap_err().is_resource());
    }

    #[test]
    fn routes_vrp_4_2() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        let opt = optimal_routes(&inst).unwrap();
        assert!(cost_matches(opt.cost, 124.871));
        let idx: Vec<u128> = opt.solutions.iter().map(|s| s.config.index()).collect();
        assert_eq!(idx, vec![779, 2125]);
        assert_eq!(
            opt.solutions[0].routes,
            vec![vec![0, 1, 0], vec![0, 2, 3, 0]]
        );
    }

    #[test]
    fn routes_vrp_5_2() {
        let inst: ProblemInstance = preset("vrp-5-2").unwrap();
        let opt = optimal_routes(&inst).unwrap();
        assert!(cost_matches(opt.cost, 138.511));
        let a3 = Configuration::from_routes(5, &[vec![0, 1, 0], vec![0, 3, 2, 4, 0]]).unwrap();
        assert!(opt.solutions.iter().any(|s| s.config == a3));
    }

    #[test]
    fn one_vehicle_per_location() {
        let inst: ProblemInstance = preset("vrp-5-3").unwrap();
        let inst = ProblemInstance::new(4, {
            let d = inst.to_document();
            d.weights
        })
        .unwrap();
        let expected: f64 = (1..5).map(|i| inst.weight(0, i) + inst.weight(i, 0)).sum();
        let opt = optimal_routes(&inst).unwrap();
        assert!((opt.cost - expected).abs() < 1e-9);
        assert_eq!(opt.solutions.len(), 1);
    }

    #[test]
    fn degree_feasible_vrp_5_2_has_subtour() {
        let inst: ProblemInstance = preset("vrp-5-2").unwrap();
        let m = degree_feasible_minimum(&inst).unwrap();
        assert!(cost_matches(m.cost, 128.545));
        let fig4 = Configuration::from_edges(5, &[(0, 1), (0, 4), (1, 0), (2, 3), (3, 2), (4, 0)])
            .unwrap();
        assert!(m.argmin.contains(&fig4));
        assert!(m
            .argmin
            .iter()
            .all(|c| classify(c, 2).class == FeasibilityClass::Subtour));
    }

    #[test]
    fn degree_feasible_vrp_4_2_equals_route_optimum() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        let m = degree_feasible_minimum(&inst).unwrap();
        let r = optimal_routes(&inst).unwrap();
        assert!((m.cost - r.cost).abs() < 1e-9);
        let idx: Vec<u128> = m.argmin.iter().map(|c| c.index()).collect();
        assert_eq!(idx, vec![779, 2125]);
    }

    #[test]
    fn degree_feasible_set_matches_classifier() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        let sweep = degree_feasible_configurations(&inst).unwrap();
        let direct: Vec<u64> = (0..1u64 << 12)
            .filter(|&z| {
                let c = Configuration::new(4, z as u128).unwrap();
                classify(&c, 2).class.is_degree_feasible()
            })
            .collect();
        assert_eq!(sweep, direct);
    }

    #[test]
    fn combination_and_permutation_counts() {
        let mut cuts = vec![1, 2];
        let mut count = 1;
        while next_combination(&mut cuts, 5) {
            count += 1;
        }
        assert_eq!(count, 6); // C(4, 2)
        let mut p = vec![1, 2, 3, 4];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn histogram_counts_every_state() {
        let inst: ProblemInstance = preset("vrp-4-2").unwrap();
        let model = build_qubo(&inst, 100.0).unwrap();
        let h = energy_histogram(&model, 10).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 4096);
        assert!(cost_matches(h[0].lower, 124.871));
    }
}
