//! Exact statevector engine for QAOA.
//!
//! The cost Hamiltonian is diagonal in the computational basis, so a cost
//! layer is a pointwise phase `a_z *= exp(-i gamma C(z))` against a
//! precomputed [`CostDiagonal`]. The mixer `-sum_q X_q` is a product of
//! single-qubit rotations; each layer applies the kernel
//! `[[cos b, i sin b], [i sin b, cos b]]` to every qubit as a butterfly over
//! amplitude pairs differing in that bit.
//!
//! Amplitude index `z` holds variable `t` in bit `t`, the same convention as
//! [`crate::instance::Configuration`].

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoder::{IsingModel, QuboModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest register the engine will allocate.
pub const MAX_QUBITS: usize = 24;

/// States at least this long are processed in parallel.
const PAR_THRESHOLD: usize = 1 << 14;
/// Fixed reduction block; keeps parallel sums bit-deterministic.
const SUM_BLOCK: usize = 1 << 12;
/// Amplitudes per cache tile for the low-qubit mixer butterflies.
const TILE_BITS: usize = 12;
/// Column width of a slab when the high qubits are swept.
const SLAB: usize = 64;

fn guard(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Resource {
            what: "qubit count",
            size: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

/// `C(z)` for every basis state `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostDiagonal<T = f64> {
    num_qubits: usize,
    values: Vec<T>,
}

impl<T: Scalar> CostDiagonal<T> {
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(Error::Domain(format!(
                "diagonal length {} is not a power of two",
                values.len()
            )));
        }
        let num_qubits = values.len().trailing_zeros() as usize;
        guard(num_qubits)?;
        Ok(Self { num_qubits, values })
    }

    /// Tabulates a QUBO energy; `values[z]` is `energy(z)`.
    pub fn from_qubo(model: &QuboModel<T>) -> Result<Self> {
        let n = model.num_vars();
        guard(n)?;
        let mut values = vec![T::zero(); 1 << n];
        values[0] = model.offset();
        // E(z) = E(z without its lowest bit t) + g_t + sum of Q_ts over the
        // remaining bits s.
        for z in 1..values.len() {
            let t = z.trailing_zeros() as usize;
            let rest = z & (z - 1);
            values[z] = values[rest] + model.local_field(rest as u64, t);
        }
        Ok(Self {
            num_qubits: n,
            values,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Arithmetic mean: the expectation in the uniform superposition.
    pub fn mean(&self) -> T {
        block_sum(&self.values, |&v| v) / T::from_usize(self.values.len()).unwrap()
    }

    /// Indices attaining the minimum within `tol`, ascending.
    pub fn argmin(&self, tol: T) -> Vec<u64> {
        let m = self.min();
        (0..self.values.len() as u64)
            .filter(|&z| self.values[z as usize] - m <= tol)
            .collect()
    }

    /// Same diagonal shifted by a constant.
    pub fn shifted(&self, delta: T) -> Self {
        Self {
            num_qubits: self.num_qubits,
            values: self.values.iter().map(|&v| v + delta).collect(),
        }
    }
}

/// Tabulates the Ising energy with bit 1 as spin `+1`.
pub fn build_cost_diagonal<T: Scalar>(model: &IsingModel<T>) -> Result<CostDiagonal<T>> {
    let n = model.num_spins();
    guard(n)?;
    let mut neighbours: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for c in model.couplings() {
        neighbours[c.i].push((c.j, c.value));
        neighbours[c.j].push((c.i, c.value));
    }
    let mut values = vec![T::zero(); 1 << n];
    // all spins down
    values[0] = model.offset() + model.couplings().iter().map(|c| c.value).sum::<T>()
        - model.fields().iter().copied().sum::<T>();
    let two = T::of(2.0);
    // Raising spin t from -1 to +1 changes the energy by 2 h_t + 2 sum_j J_tj s_j.
    for z in 1..values.len() {
        let t = z.trailing_zeros() as usize;
        let rest = z & (z - 1);
        let mut delta = model.fields()[t];
        for &(j, v) in &neighbours[t] {
            delta = if rest >> j & 1 == 1 {
                delta + v
            } else {
                delta - v
            };
        }
        values[z] = values[rest] + two * delta;
    }
    Ok(CostDiagonal {
        num_qubits: n,
        values,
    })
}

fn block_sum<A: Sync, T: Scalar>(items: &[A], f: impl Fn(&A) -> T + Sync) -> T {
    if items.len() < PAR_THRESHOLD {
        return items.iter().map(&f).sum();
    }
    let partial: Vec<T> = items
        .par_chunks(SUM_BLOCK)
        .map(|c| c.iter().map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

/// Depth-`p` angle schedule: `betas[l]` for the mixer and `gammas[l]` for
/// the cost phase of layer `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct QaoaSchedule<T = f64> {
    betas: Vec<T>,
    gammas: Vec<T>,
}

impl<T: Scalar> QaoaSchedule<T> {
    pub fn new(betas: Vec<T>, gammas: Vec<T>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain("schedule needs at least one layer".into()));
        }
        if betas.len() != gammas.len() {
            return Err(Error::DimensionMismatch {
                expected: betas.len(),
                found: gammas.len(),
            });
        }
        if betas.iter().chain(&gammas).any(|a| !a.is_finite()) {
            return Err(Error::Domain("schedule angles must be finite".into()));
        }
        Ok(Self { betas, gammas })
    }

    /// Splits a `2p` decision vector laid out as `[betas.., gammas..]`.
    pub fn from_vector(v: &[T]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "decision vector length {} is odd",
                v.len()
            )));
        }
        let p = v.len() / 2;
        Self::new(v[..p].to_vec(), v[p..].to_vec())
    }

    pub fn to_vector(&self) -> Vec<T> {
        self.betas.iter().chain(&self.gammas).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn gammas(&self) -> &[T] {
        &self.gammas
    }
}

/// `2^N` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector<T = f64> {
    num_qubits: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Scalar> Statevector<T> {
    /// Uniform superposition `|+>^N`.
    pub fn plus(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Domain("register needs at least one qubit".into()));
        }
        guard(num_qubits)?;
        let len = 1usize << num_qubits;
        let a = T::one() / T::from_usize(len).unwrap().sqrt();
        Ok(Self {
            num_qubits,
            amps: vec![Complex::new(a, T::zero()); len],
        })
    }

    /// Computational basis state `|z>`.
    pub fn basis(num_qubits: usize, z: u64) -> Result<Self> {
        guard(num_qubits)?;
        let len = 1usize << num_qubits;
        if z as usize >= len {
            return Err(Error::Domain(format!("basis index {z} out of range")));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); len];
        amps[z as usize] = Complex::new(T::one(), T::zero());
        Ok(Self { num_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        if !amps.len().is_power_of_two() || amps.len() < 2 {
            return Err(Error::Domain(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        guard(num_qubits)?;
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        block_sum(&self.amps, |a| a.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_dims(&self, diag: &CostDiagonal<T>) {
        assert_eq!(
            self.num_qubits, diag.num_qubits,
            "state and diagonal sizes differ"
        );
    }

    /// `a_z *= exp(-i gamma C(z))`.
    pub fn apply_cost_phase(&mut self, gamma: T, diag: &CostDiagonal<T>) {
        self.check_dims(diag);
        if self.amps.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
            self.amps
                .par_chunks_mut(SUM_BLOCK)
                .zip(diag.values.par_chunks(SUM_BLOCK))
                .for_each(|(a, c)| phase_block(a, c, gamma));
        } else {
            phase_block(&mut self.amps, &diag.values, gamma);
        }
    }

    /// Applies `exp(-i beta H_mixer)` with `H_mixer = -sum_q X_q`.
    pub fn apply_mixer(&mut self, beta: T) {
        self.apply_layer(None, beta);
    }

    /// One cost layer followed by one mixer layer, sharing a pass over memory.
    pub fn apply_layer(&mut self, cost: Option<(T, &CostDiagonal<T>)>, beta: T) {
        if let Some((_, diag)) = cost {
            self.check_dims(diag);
        }
        let n = self.num_qubits;
        let rot = Rotation::new(beta);
        let tile_bits = n.min(TILE_BITS);
        let tile = 1usize << tile_bits;
        let low = |(k, amps): (usize, &mut [Complex<T>])| {
            if let Some((gamma, diag)) = cost {
                phase_block(amps, &diag.values[k * tile..(k + 1) * tile], gamma);
            }
            for q in 0..tile_bits {
                rot.apply_qubit(amps, q);
            }
        };
        let parallel = self.amps.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1;
        if parallel {
            self.amps.par_chunks_mut(tile).enumerate().for_each(low);
            for q in tile_bits..n {
                let half = 1usize << q;
                self.amps.par_chunks_mut(2 * half).for_each(|block| {
                    let (lo, hi) = block.split_at_mut(half);
                    lo.par_chunks_mut(SUM_BLOCK)
                        .zip(hi.par_chunks_mut(SUM_BLOCK))
                        .for_each(|(l, h)| rot.apply_pair(l, h));
                });
            }
        } else {
            self.amps.chunks_mut(tile).enumerate().for_each(low);
            // Remaining qubits act on tile indices; sweep narrow column slabs
            // so every butterfly of a slab stays in cache.
            for col in (0..tile).step_by(SLAB) {
                for q in tile_bits..n {
                    let half = 1usize << q;
                    for base in (0..self.amps.len()).step_by(2 * half) {
                        for row in (base..base + half).step_by(tile) {
                            let (l, h) = self.amps.split_at_mut(row + half);
                            rot.apply_pair(
                                &mut l[row + col..row + col + SLAB],
                                &mut h[col..col + SLAB],
                            );
                        }
                    }
                }
            }
        }
    }

    /// `sum_z |a_z|^2 C(z)`.
    pub fn expectation(&self, diag: &CostDiagonal<T>) -> T {
        self.check_dims(diag);
        if self.amps.len() < PAR_THRESHOLD {
            return self
                .amps
                .iter()
                .zip(&diag.values)
                .map(|(a, &c)| a.norm_sqr() * c)
                .sum();
        }
        let partial: Vec<T> = self
            .amps
            .par_chunks(SUM_BLOCK)
            .zip(diag.values.par_chunks(SUM_BLOCK))
            .map(|(a, c)| a.iter().zip(c).map(|(a, &c)| a.norm_sqr() * c).sum())
            .collect();
        partial.into_iter().sum()
    }

    /// Draws `shots` measurements; returns counts per observed index.
    /// Deterministic for a given seed.
    pub fn sample(&self, shots: usize, seed: u64) -> Result<BTreeMap<u64, u64>> {
        if shots == 0 {
            return Err(Error::Domain("need at least one shot".into()));
        }
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0f64;
        for a in &self.amps {
            acc += a.norm_sqr().as_f64();
            cumulative.push(acc);
        }
        let total = acc;
        let last_nonzero = self
            .amps
            .iter()
            .rposition(|a| a.norm_sqr() > T::zero())
            .unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            let z = cumulative.partition_point(|&c| c <= u).min(last_nonzero);
            *counts.entry(z as u64).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Sample mean of `C` over `shots` measurements.
    pub fn estimate_expectation(
        &self,
        diag: &CostDiagonal<T>,
        shots: usize,
        seed: u64,
    ) -> Result<T> {
        self.check_dims(diag);
        let counts = self.sample(shots, seed)?;
        let sum: T = counts
            .iter()
            .map(|(&z, &n)| diag.values[z as usize] * T::from_u64(n).unwrap())
            .sum();
        Ok(sum / T::from_usize(shots).unwrap())
    }

    /// The `k` most probable indices, by probability then index.
    pub fn top_k(&self, k: usize) -> Vec<(u64, T)> {
        let mut order: Vec<(u64, T)> = self
            .amps
            .iter()
            .enumerate()
            .map(|(z, a)| (z as u64, a.norm_sqr()))
            .collect();
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        order.truncate(k);
        order
    }
}

fn phase_block<T: Scalar>(amps: &mut [Complex<T>], costs: &[T], gamma: T) {
    for (a, &c) in amps.iter_mut().zip(costs) {
        let (s, co) = (gamma * c).sin_cos();
        *a = Complex::new(a.re * co + a.im * s, a.im * co - a.re * s);
    }
}

/// The single-qubit mixer `exp(i beta X) = [[c, i s], [i s, c]]`.
#[derive(Clone, Copy)]
struct Rotation<T> {
    c: T,
    s: T,
}

impl<T: Scalar> Rotation<T> {
    fn new(beta: T) -> Self {
        let (s, c) = beta.sin_cos();
        Self { c, s }
    }

    /// `(lo, hi) <- (c lo + i s hi, i s lo + c hi)` element-wise.
    #[inline]
    fn apply_pair(self, lo: &mut [Complex<T>], hi: &mut [Complex<T>]) {
        let (c, s) = (self.c, self.s);
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            let (a, b) = (*l, *h);
            *l = Complex::new(c * a.re - s * b.im, c * a.im + s * b.re);
            *h = Complex::new(c * b.re - s * a.im, c * b.im + s * a.re);
        }
    }

    fn apply_qubit(self, amps: &mut [Complex<T>], q: usize) {
        let half = 1usize << q;
        for block in amps.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            self.apply_pair(lo, hi);
        }
    }
}

/// Uniform superposition over `num_qubits` qubits.
pub fn init_plus<T: Scalar>(num_qubits: usize) -> Result<Statevector<T>> {
    Statevector::plus(num_qubits)
}

/// `|+>^N` followed by `p` layers of cost phase then mixer.
pub fn evolve<T: Scalar>(
    schedule: &QaoaSchedule<T>,
    diag: &CostDiagonal<T>,
) -> Result<Statevector<T>> {
    let mut state = Statevector::plus(diag.num_qubits())?;
    for (&beta, &gamma) in schedule.betas.iter().zip(&schedule.gammas) {
        state.apply_layer(Some((gamma, diag)), beta);
    }
    Ok(state)
}
