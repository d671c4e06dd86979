//! Penalty QUBO construction and the QUBO to Ising change of variables.
//!
//! The QUBO energy of a routing configuration `x` is
//!
//! ```text
//! E(x) = sum_{i->j} w_ij x_ij
//!      + A * sum_{i>=1} (1 - out_i)^2 + A * sum_{i>=1} (1 - in_i)^2
//!      + A * (k - out_0)^2 + A * (k - in_0)^2
//! ```
//!
//! where `out_i` / `in_i` are the out- and in-degree sums of node `i`.
//! Models keep quadratic terms only for `s != t`; any diagonal entry is folded
//! into the linear coefficients since `x^2 = x` on binaries.
//!
//! Ising spins use `x = (s + 1) / 2`, so bit value 1 is spin `+1`, and the
//! Ising energy is `sum_{i<j} J_ij s_i s_j + sum_i h_i s_i + d`. The
//! coefficients are chosen so `ising(2x - 1) == qubo(x)` for every `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{pair_unchecked, ProblemInstance};
use crate::scalar::{close, Scalar};

/// Largest variable count addressable by an integer configuration index.
pub const MAX_INDEX_VARS: usize = 63;

/// `x^T Q x + g^T x + c` over `N` binaries with `Q` symmetric and zero on the
/// diagonal (each unordered pair is counted once in the energy).
#[derive(Clone, Debug, PartialEq)]
pub struct QuboModel<T = f64> {
    num_vars: usize,
    quadratic: Vec<T>,
    linear: Vec<T>,
    offset: T,
    penalty: T,
}

impl<T: Scalar> QuboModel<T> {
    /// Zero model over `num_vars` binaries.
    pub fn zeros(num_vars: usize, penalty: T) -> Self {
        Self {
            num_vars,
            quadratic: vec![T::zero(); num_vars * num_vars],
            linear: vec![T::zero(); num_vars],
            offset: T::zero(),
            penalty,
        }
    }

    /// Builds a model from a dense (not necessarily symmetric) matrix. The
    /// energy is `x^T Q x + g^T x + c` with the full double sum over `Q`.
    pub fn from_dense(q: &[Vec<T>], g: Vec<T>, c: T, penalty: T) -> Result<Self> {
        let n = g.len();
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.len(),
            });
        }
        let mut model = Self::zeros(n, penalty);
        model.linear = g;
        model.offset = c;
        for (s, row) in q.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (t, &v) in row.iter().enumerate() {
                if s == t {
                    model.linear[s] = model.linear[s] + v;
                } else {
                    model.add_pair(s, t, v);
                }
            }
        }
        Ok(model)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn penalty(&self) -> T {
        self.penalty
    }

    /// Coefficient of `x_s x_t` in the energy, counted once per unordered pair.
    pub fn quadratic(&self, s: usize, t: usize) -> T {
        self.quadratic[s * self.num_vars + t]
    }

    pub fn linear(&self, t: usize) -> T {
        self.linear[t]
    }

    pub fn linear_terms(&self) -> &[T] {
        &self.linear
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// Nonzero pair coefficients with `s < t`.
    pub fn quadratic_terms(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.num_vars;
        (0..n).flat_map(move |s| {
            (s + 1..n).filter_map(move |t| {
                let v = self.quadratic(s, t);
                (v != T::zero()).then_some((s, t, v))
            })
        })
    }

    pub(crate) fn add_constant(&mut self, v: T) {
        self.offset = self.offset + v;
    }

    pub(crate) fn add_linear(&mut self, t: usize, v: T) {
        self.linear[t] = self.linear[t] + v;
    }

    pub(crate) fn add_pair(&mut self, s: usize, t: usize, v: T) {
        if s == t {
            self.add_linear(s, v);
            return;
        }
        let n = self.num_vars;
        self.quadratic[s * n + t] = self.quadratic[s * n + t] + v;
        self.quadratic[t * n + s] = self.quadratic[t * n + s] + v;
    }

    /// Adds `weight * (target - sum_{t in vars} x_t)^2`, expanded with
    /// `x_t^2 = x_t`.
    pub(crate) fn add_squared_constraint(&mut self, vars: &[usize], target: T, weight: T) {
        let two = T::of(2.0);
        self.add_constant(weight * target * target);
        for &t in vars {
            self.add_linear(t, weight * (T::one() - two * target));
        }
        for (a, &s) in vars.iter().enumerate() {
            for &t in &vars[a + 1..] {
                self.add_pair(s, t, two * weight);
            }
        }
    }

    pub fn energy(&self, x: &[bool]) -> Result<T> {
        if x.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: x.len(),
            });
        }
        let n = self.num_vars;
        let mut e = self.offset;
        for s in (0..n).filter(|&s| x[s]) {
            e = e + self.linear[s];
            let row = &self.quadratic[s * n..(s + 1) * n];
            for t in (s + 1..n).filter(|&t| x[t]) {
                e = e + row[t];
            }
        }
        Ok(e)
    }

    /// Energy of the configuration whose bit `t` is `x_t`.
    pub fn energy_index(&self, z: u64) -> T {
        debug_assert!(self.num_vars <= MAX_INDEX_VARS);
        let n = self.num_vars;
        let mut e = self.offset;
        let mut rest = z;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            e = e + self.linear[s];
            let row = &self.quadratic[s * n..(s + 1) * n];
            let mut higher = rest;
            while higher != 0 {
                let t = higher.trailing_zeros() as usize;
                higher &= higher - 1;
                e = e + row[t];
            }
        }
        e
    }

    /// `g_t + sum_{s != t} Q_ts x_s`: the energy gained by switching `x_t`
    /// on while every other bit keeps its value in `z`.
    pub fn local_field(&self, z: u64, t: usize) -> T {
        let row = &self.quadratic[t * self.num_vars..(t + 1) * self.num_vars];
        let mut f = self.linear[t];
        let mut rest = z & !(1u64 << t);
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            f = f + row[s];
        }
        f
    }

    /// `energy(z ^ (1 << t)) - energy(z)`, in `O(N)`.
    pub fn flip_delta(&self, z: u64, t: usize) -> T {
        let f = self.local_field(z, t);
        if z >> t & 1 == 1 {
            -f
        } else {
            f
        }
    }

    pub fn cast<U: Scalar>(&self) -> QuboModel<U> {
        let c = |v: &T| U::of(v.as_f64());
        QuboModel {
            num_vars: self.num_vars,
            quadratic: self.quadratic.iter().map(c).collect(),
            linear: self.linear.iter().map(c).collect(),
            offset: c(&self.offset),
            penalty: c(&self.penalty),
        }
    }

    pub fn to_document(&self) -> QuboDocument {
        QuboDocument {
            num_vars: self.num_vars,
            penalty: self.penalty.as_f64(),
            offset: self.offset.as_f64(),
            linear: sparse_linear(&self.linear),
            quadratic: self
                .quadratic_terms()
                .map(|(i, j, v)| PairTerm {
                    i,
                    j,
                    value: v.as_f64(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &QuboDocument) -> Result<Self> {
        let mut m = Self::zeros(doc.num_vars, T::of(doc.penalty));
        m.offset = T::of(doc.offset);
        for term in &doc.linear {
            check_var(term.i, doc.num_vars)?;
            m.add_linear(term.i, T::of(term.value));
        }
        for term in &doc.quadratic {
            check_var(term.i, doc.num_vars)?;
            check_var(term.j, doc.num_vars)?;
            m.add_pair(term.i, term.j, T::of(term.value));
        }
        Ok(m)
    }

    /// Compares coefficients against `other`. A multilinear polynomial over
    /// binaries is determined by its coefficients, so a mismatch here is a
    /// mismatch in energy; the returned index is a configuration that
    /// witnesses it.
    pub fn first_disagreement(&self, other: &Self, rel_tol: T) -> Option<u64> {
        if self.num_vars != other.num_vars {
            return Some(0);
        }
        if !close(self.offset, other.offset, rel_tol) {
            return Some(0);
        }
        let n = self.num_vars;
        for t in 0..n {
            if !close(self.linear[t], other.linear[t], rel_tol) {
                return Some(1 << t);
            }
        }
        for s in 0..n {
            for t in s + 1..n {
                if !close(self.quadratic(s, t), other.quadratic(s, t), rel_tol) {
                    return Some(1 << s | 1 << t);
                }
            }
        }
        None
    }
}

fn check_var(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::Domain(format!("variable {i} out of range for {n}")));
    }
    Ok(())
}

fn sparse_linear<T: Scalar>(v: &[T]) -> Vec<LinearTerm> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != T::zero())
        .map(|(i, x)| LinearTerm {
            i,
            value: x.as_f64(),
        })
        .collect()
}

/// Default penalty weight: `n * max_ij w_ij`, or 1 for an all-zero matrix.
pub fn default_penalty<T: Scalar>(inst: &ProblemInstance<T>) -> T {
    let a = T::from_usize(inst.n()).unwrap() * inst.max_weight();
    if a > T::zero() {
        a
    } else {
        T::one()
    }
}

fn check_penalty<T: Scalar>(penalty: T) -> Result<()> {
    if !penalty.is_finite() || penalty <= T::zero() {
        return Err(Error::Domain(format!(
            "penalty must be positive and finite, got {penalty}"
        )));
    }
    Ok(())
}

/// Builds the penalty QUBO by expanding each squared degree constraint.
pub fn build_qubo<T: Scalar>(inst: &ProblemInstance<T>, penalty: T) -> Result<QuboModel<T>> {
    check_penalty(penalty)?;
    let n = inst.n();
    let mut model = QuboModel::zeros(inst.num_vars(), penalty);
    for (t, w) in inst.edge_weights().into_iter().enumerate() {
        model.add_linear(t, w);
    }
    let k = T::from_usize(inst.k()).unwrap();
    for node in 0..n {
        let target = if node == 0 { k } else { T::one() };
        let outgoing: Vec<usize> = (0..n)
            .filter(|&j| j != node)
            .map(|j| inst.var_index(node, j).unwrap())
            .collect();
        let incoming: Vec<usize> = (0..n)
            .filter(|&i| i != node)
            .map(|i| inst.var_index(i, node).unwrap())
            .collect();
        model.add_squared_constraint(&outgoing, target, penalty);
        model.add_squared_constraint(&incoming, target, penalty);
    }
    Ok(model)
}

/// Assembles the QUBO from indicator-vector products and checks it against
/// [`build_qubo`]:
///
/// ```text
/// Q = A (Z_T^T Z_T + I_n (x) J_{n-1})
/// g = W - 2Ak (s_0 + t_0) - 2A ((1 - s_0) + (1 - t_0))
/// c = 2A (n - 1) + 2A k^2
/// ```
///
/// `Z_T` stacks the target indicators `z_T[i]` (edges entering node `i`),
/// `s_0 = e_0 (x) 1_{n-1}` marks edges leaving the depot and `t_0 = z_T[0]`
/// edges entering it.
pub fn build_qubo_closed_form<T: Scalar>(
    inst: &ProblemInstance<T>,
    penalty: T,
) -> Result<QuboModel<T>> {
    check_penalty(penalty)?;
    let n = inst.n();
    let vars = inst.num_vars();
    let a = penalty;
    let two = T::of(2.0);
    let k = T::from_usize(inst.k()).unwrap();

    let target_indicator: Vec<Vec<T>> = (0..n)
        .map(|node| {
            (0..vars)
                .map(|t| {
                    if pair_unchecked(n, t).1 == node {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();
    let source_depot: Vec<T> = (0..vars)
        .map(|t| {
            if pair_unchecked(n, t).0 == 0 {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();

    // I_n (x) J_{n-1}: all-ones blocks on the diagonal, one per source node.
    let block = n - 1;
    let q: Vec<Vec<T>> = (0..vars)
        .map(|s| {
            (0..vars)
                .map(|t| {
                    let targets: T = target_indicator.iter().map(|z| z[s] * z[t]).sum();
                    let same_source = if s / block == t / block {
                        T::one()
                    } else {
                        T::zero()
                    };
                    a * (targets + same_source)
                })
                .collect()
        })
        .collect();

    let weights = inst.edge_weights();
    let t0 = &target_indicator[0];
    let g: Vec<T> = (0..vars)
        .map(|t| {
            let depot = source_depot[t] + t0[t];
            let other = (T::one() - source_depot[t]) + (T::one() - t0[t]);
            weights[t] - two * a * k * depot - two * a * other
        })
        .collect();

    let c = two * a * T::from_usize(n - 1).unwrap() + two * a * k * k;
    let closed = QuboModel::from_dense(&q, g, c, penalty)?;

    let expanded = build_qubo(inst, penalty)?;
    if let Some(z) = closed.first_disagreement(&expanded, T::of(1e-9)) {
        let witness = if vars <= MAX_INDEX_VARS { z } else { 0 };
        return Err(Error::FormulationMismatch {
            index: witness,
            closed_form: closed.energy_index(witness).as_f64(),
            expanded: expanded.energy_index(witness).as_f64(),
        });
    }
    Ok(closed)
}

/// One pairwise coupling `J_ij s_i s_j` with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling<T = f64> {
    pub i: usize,
    pub j: usize,
    pub value: T,
}

/// `sum_{i<j} J_ij s_i s_j + sum_i h_i s_i + d` over spins `s_i in {-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel<T = f64> {
    num_spins: usize,
    couplings: Vec<Coupling<T>>,
    fields: Vec<T>,
    offset: T,
}

impl<T: Scalar> IsingModel<T> {
    pub fn new(
        num_spins: usize,
        couplings: Vec<Coupling<T>>,
        fields: Vec<T>,
        offset: T,
    ) -> Result<Self> {
        if fields.len() != num_spins {
            return Err(Error::DimensionMismatch {
                expected: num_spins,
                found: fields.len(),
            });
        }
        let mut merged: Vec<Coupling<T>> = Vec::with_capacity(couplings.len());
        let mut sorted = couplings;
        for c in &mut sorted {
            if c.i == c.j || c.i.max(c.j) >= num_spins {
                return Err(Error::Domain(format!(
                    "invalid coupling ({}, {}) for {num_spins} spins",
                    c.i, c.j
                )));
            }
            if c.i > c.j {
                std::mem::swap(&mut c.i, &mut c.j);
            }
        }
        sorted.sort_by_key(|c| (c.i, c.j));
        for c in sorted {
            match merged.last_mut() {
                Some(last) if (last.i, last.j) == (c.i, c.j) => last.value = last.value + c.value,
                _ => merged.push(c),
            }
        }
        Ok(Self {
            num_spins,
            couplings: merged,
            fields,
            offset,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn couplings(&self) -> &[Coupling<T>] {
        &self.couplings
    }

    pub fn fields(&self) -> &[T] {
        &self.fields
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn energy(&self, spins: &[i8]) -> Result<T> {
        if spins.len() != self.num_spins {
            return Err(Error::DimensionMismatch {
                expected: self.num_spins,
                found: spins.len(),
            });
        }
        if let Some(p) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!(
                "spin {p} is {}, expected -1 or +1",
                spins[p]
            )));
        }
        let s = |i: usize| if spins[i] > 0 { T::one() } else { -T::one() };
        let pairs: T = self
            .couplings
            .iter()
            .map(|c| c.value * s(c.i) * s(c.j))
            .sum();
        let fields: T = self.fields.iter().enumerate().map(|(i, &h)| h * s(i)).sum();
        Ok(pairs + fields + self.offset)
    }

    /// Energy of the spin assignment whose bit `t` set means `s_t = +1`.
    pub fn energy_index(&self, z: u64) -> T {
        let s = |i: usize| {
            if z >> i & 1 == 1 {
                T::one()
            } else {
                -T::one()
            }
        };
        let pairs: T = self
            .couplings
            .iter()
            .map(|c| c.value * s(c.i) * s(c.j))
            .sum();
        let fields: T = self.fields.iter().enumerate().map(|(i, &h)| h * s(i)).sum();
        pairs + fields + self.offset
    }

    /// Back-substitutes `s = 2x - 1`.
    pub fn to_qubo(&self, penalty: T) -> QuboModel<T> {
        let two = T::of(2.0);
        let four = T::of(4.0);
        let mut m = QuboModel::zeros(self.num_spins, penalty);
        m.add_constant(self.offset);
        for (i, &h) in self.fields.iter().enumerate() {
            m.add_linear(i, two * h);
            m.add_constant(-h);
        }
        for c in &self.couplings {
            m.add_pair(c.i, c.j, four * c.value);
            m.add_linear(c.i, -two * c.value);
            m.add_linear(c.j, -two * c.value);
            m.add_constant(c.value);
        }
        m
    }

    pub fn to_document(&self) -> IsingDocument {
        IsingDocument {
            num_spins: self.num_spins,
            offset: self.offset.as_f64(),
            fields: sparse_linear(&self.fields),
            couplings: self
                .couplings
                .iter()
                .map(|c| PairTerm {
                    i: c.i,
                    j: c.j,
                    value: c.value.as_f64(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &IsingDocument) -> Result<Self> {
        let mut fields = vec![T::zero(); doc.num_spins];
        for term in &doc.fields {
            check_var(term.i, doc.num_spins)?;
            fields[term.i] = fields[term.i] + T::of(term.value);
        }
        let couplings = doc
            .couplings
            .iter()
            .map(|t| Coupling {
                i: t.i,
                j: t.j,
                value: T::of(t.value),
            })
            .collect();
        Self::new(doc.num_spins, couplings, fields, T::of(doc.offset))
    }
}

/// Substitutes `x = (s + 1) / 2` and groups terms:
/// `J_ij = Q_ij / 4`, `h_i = g_i / 2 + sum_j Q_ij / 4`,
/// `d = c + sum_i g_i / 2 + sum_{i<j} Q_ij / 4`.
pub fn qubo_to_ising<T: Scalar>(model: &QuboModel<T>) -> IsingModel<T> {
    let n = model.num_vars();
    let half = T::of(0.5);
    let quarter = T::of(0.25);
    let mut fields: Vec<T> = model.linear_terms().iter().map(|&g| g * half).collect();
    let mut offset = model.offset() + model.linear_terms().iter().map(|&g| g * half).sum::<T>();
    let mut couplings = Vec::new();
    for (i, j, q) in model.quadratic_terms() {
        let v = q * quarter;
        couplings.push(Coupling { i, j, value: v });
        fields[i] = fields[i] + v;
        fields[j] = fields[j] + v;
        offset = offset + v;
    }
    debug_assert!(couplings.iter().all(|c| c.j < n));
    IsingModel {
        num_spins: n,
        couplings,
        fields,
        offset,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub i: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Sparse QUBO listing for external solvers. Pair terms are counted once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuboDocument {
    pub num_vars: usize,
    pub penalty: f64,
    pub offset: f64,
    pub linear: Vec<LinearTerm>,
    pub quadratic: Vec<PairTerm>,
}

/// Sparse Ising listing; energy is `sum J s_i s_j + sum h s_i + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingDocument {
    pub num_spins: usize,
    pub offset: f64,
    pub fields: Vec<LinearTerm>,
    pub couplings: Vec<PairTerm>,
}

/// Spin vector for the bits of `z`: bit 1 maps to `+1`.
pub fn spins_of(z: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|t| if z >> t & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// Bit vector for the bits of `z`.
pub fn bits_of(z: u64, n: usize) -> Vec<bool> {
    (0..n).map(|t| z >> t & 1 == 1).collect()
}
