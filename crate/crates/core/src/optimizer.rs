//! Derivative-free minimizers for the variational outer loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::QaoaSchedule;

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    NelderMead,
    CoordinateDescent,
}

/// Settings for one local minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationRun<T = f64> {
    pub start: Vec<T>,
    /// Initial simplex edge (or pattern step) per coordinate.
    pub steps: Vec<T>,
    /// Maximum objective evaluations.
    pub budget: usize,
    /// Stop once the simplex value spread (or the pattern step) drops below this.
    pub tolerance: T,
    pub seed: u64,
}

impl<T: Scalar> OptimizationRun<T> {
    pub fn new(start: Vec<T>, step: T, budget: usize, tolerance: T, seed: u64) -> Self {
        let steps = vec![step; start.len()];
        Self {
            start,
            steps,
            budget,
            tolerance,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let dim = self.start.len();
        if dim == 0 {
            return Err(Error::Domain("cannot optimize over zero dimensions".into()));
        }
        if self.steps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.steps.len(),
            });
        }
        if self.budget < dim + 2 {
            return Err(Error::Domain(format!(
                "budget {} is below the {} evaluations the initial simplex needs",
                self.budget,
                dim + 2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: usize,
    pub best: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult<T = f64> {
    pub best_point: Vec<T>,
    pub best_value: T,
    pub start_value: T,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each evaluation; non-increasing.
    pub trace: Vec<TracePoint>,
}

/// Counts evaluations, enforces the budget and tracks the best point.
struct Evaluator<'f, T, F> {
    objective: &'f F,
    budget: usize,
    evaluations: usize,
    best_point: Vec<T>,
    best_value: T,
    trace: Vec<TracePoint>,
}

impl<'f, T: Scalar, F: Fn(&[T]) -> T> Evaluator<'f, T, F> {
    fn new(objective: &'f F, budget: usize) -> Self {
        Self {
            objective,
            budget,
            evaluations: 0,
            best_point: Vec::new(),
            best_value: T::infinity(),
            trace: Vec::with_capacity(budget),
        }
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[T]) -> Result<Option<T>> {
        if self.exhausted() {
            return Ok(None);
        }
        let v = (self.objective)(x);
        self.evaluations += 1;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                point: x.iter().map(|a| a.as_f64()).collect(),
            });
        }
        if v < self.best_value {
            self.best_value = v;
            self.best_point = x.to_vec();
        }
        self.trace.push(TracePoint {
            evaluations: self.evaluations,
            best: self.best_value.as_f64(),
        });
        Ok(Some(v))
    }

    fn finish(self, start_value: T, converged: bool) -> OptimizationResult<T> {
        OptimizationResult {
            best_point: self.best_point,
            best_value: self.best_value,
            start_value,
            evaluations: self.evaluations,
            converged,
            trace: self.trace,
        }
    }
}

fn affine<T: Scalar>(base: &[T], dir_from: &[T], dir_to: &[T], t: T) -> Vec<T> {
    base.iter()
        .zip(dir_from.iter().zip(dir_to))
        .map(|(&b, (&f, &to))| b + t * (to - f))
        .collect()
}

/// Nelder-Mead simplex search with reflection 1, expansion 2, contraction
/// 0.5 and shrink 0.5.
pub fn nelder_mead<T, F>(objective: &F, run: &OptimizationRun<T>) -> Result<OptimizationResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    run.validate()?;
    let dim = run.start.len();
    let mut ev = Evaluator::new(objective, run.budget);

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let start_value = ev.eval(&run.start)?.expect("budget checked");
    simplex.push((run.start.clone(), start_value));
    for i in 0..dim {
        let mut x = run.start.clone();
        x[i] = x[i] + run.steps[i];
        let v = ev.eval(&x)?.expect("budget checked");
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (
        T::of(REFLECTION),
        T::of(EXPANSION),
        T::of(CONTRACTION),
        T::of(SHRINK),
    );
    let mut converged = false;
    loop {
        // stable sort keeps older vertices first among ties
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst - best < run.tolerance {
            converged = true;
            break;
        }
        if ev.exhausted() {
            break;
        }
        let second_worst = simplex[dim - 1].1;
        let inv = T::one() / T::from_usize(dim).unwrap();
        let centroid: Vec<T> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v.0[j]).sum::<T>() * inv)
            .collect();
        let worst_point = simplex[dim].0.clone();

        let reflected = affine(&centroid, &worst_point, &centroid, alpha);
        let Some(fr) = ev.eval(&reflected)? else {
            break;
        };
        if fr < best {
            let expanded = affine(&centroid, &centroid, &reflected, gamma);
            let Some(fe) = ev.eval(&expanded)? else {
                simplex[dim] = (reflected, fr);
                break;
            };
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, threshold) = if fr < worst {
            (affine(&centroid, &centroid, &reflected, rho), fr)
        } else {
            (affine(&centroid, &centroid, &worst_point, rho), worst)
        };
        let Some(fc) = ev.eval(&contracted)? else {
            break;
        };
        if fc < threshold || (fr < worst && fc <= threshold) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = affine(&anchor, &anchor, &vertex.0, sigma);
            let Some(v) = ev.eval(&x)? else { break };
            *vertex = (x, v);
        }
    }
    Ok(ev.finish(start_value, converged))
}

/// Compass search: try `+-step` along each coordinate, keep improvements,
/// halve the step after a full sweep without one.
pub fn coordinate_descent<T, F>(
    objective: &F,
    run: &OptimizationRun<T>,
) -> Result<OptimizationResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    run.validate()?;
    let mut ev = Evaluator::new(objective, run.budget);
    let mut x = run.start.clone();
    let start_value = ev.eval(&x)?.expect("budget checked");
    let mut fx = start_value;
    let mut steps = run.steps.clone();
    let half = T::of(0.5);
    let mut converged = false;
    'outer: loop {
        if steps.iter().all(|s| s.abs() < run.tolerance) {
            converged = true;
            break;
        }
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [T::one(), -T::one()] {
                let mut y = x.clone();
                y[i] = y[i] + sign * steps[i];
                let Some(fy) = ev.eval(&y)? else { break 'outer };
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s = *s * half);
        }
    }
    Ok(ev.finish(start_value, converged))
}

pub fn minimize<T, F>(
    kind: OptimizerKind,
    objective: &F,
    run: &OptimizationRun<T>,
) -> Result<OptimizationResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    match kind {
        OptimizerKind::NelderMead => nelder_mead(objective, run),
        OptimizerKind::CoordinateDescent => coordinate_descent(objective, run),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiStartResult<T = f64> {
    pub best: OptimizationResult<T>,
    /// Which start produced `best` (0 is the unperturbed template start).
    pub best_start: usize,
    pub start_points: Vec<Vec<T>>,
    pub values: Vec<T>,
}

/// Start points for [`multi_start`]: the template start first, then copies
/// perturbed by `U(-1, 1) * perturbation * steps[i]` per coordinate.
pub fn start_points<T: Scalar>(
    template: &OptimizationRun<T>,
    starts: usize,
    perturbation: T,
    seed: u64,
) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![template.start.clone()];
    for _ in 1..starts {
        let p = template
            .start
            .iter()
            .zip(&template.steps)
            .map(|(&x, &s)| x + perturbation * s * T::of(rng.random_range(-1.0..1.0)))
            .collect();
        points.push(p);
    }
    points
}

/// Runs the chosen optimizer from `starts` seeded start points (in
/// parallel) and keeps the lowest value, ties broken by start index.
pub fn multi_start<T, F>(
    kind: OptimizerKind,
    objective: &F,
    template: &OptimizationRun<T>,
    starts: usize,
    perturbation: T,
    seed: u64,
) -> Result<MultiStartResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    if starts == 0 {
        return Err(Error::Domain("need at least one start".into()));
    }
    let points = start_points(template, starts, perturbation, seed);
    let results: Vec<OptimizationResult<T>> = points
        .par_iter()
        .map(|p| {
            let run = OptimizationRun {
                start: p.clone(),
                ..template.clone()
            };
            minimize(kind, objective, &run)
        })
        .collect::<Result<_>>()?;
    let values: Vec<T> = results.iter().map(|r| r.best_value).collect();
    let best_start = (0..results.len())
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)))
        .unwrap();
    let best = results.into_iter().nth(best_start).unwrap();
    Ok(MultiStartResult {
        best,
        best_start,
        start_points: points,
        values,
    })
}

/// Annealing-style initial angles: `gamma_l = gamma_max (l + 1) / p` rises
/// and `beta_l = beta_max (1 - l / p)` falls over the layers.
pub fn ramp_schedule<T: Scalar>(p: usize, beta_max: T, gamma_max: T) -> Result<QaoaSchedule<T>> {
    if p == 0 {
        return Err(Error::Domain("ramp needs at least one layer".into()));
    }
    let pf = T::from_usize(p).unwrap();
    let betas = (0..p)
        .map(|l| beta_max * (T::one() - T::from_usize(l).unwrap() / pf))
        .collect();
    let gammas = (0..p)
        .map(|l| gamma_max * T::from_usize(l + 1).unwrap() / pf)
        .collect();
    QaoaSchedule::new(betas, gammas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(v: &[f64]) -> f64 {
        v.iter().map(|x| (x - 3.0).powi(2)).sum()
    }

    fn rosenbrock(v: &[f64]) -> f64 {
        (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2)
    }

    #[test]
    fn bowl_converges() {
        let run = OptimizationRun::new(vec![0.0, 0.0], 0.5, 2000, 1e-16, 0);
        let r = nelder_mead(&bowl, &run).unwrap();
        assert!(r.converged);
        for x in &r.best_point {
            assert!((x - 3.0).abs() < 1e-6, "{:?}", r.best_point);
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let run = OptimizationRun::new(vec![-1.2, 1.0], 0.5, 5000, 1e-20, 0);
        let r = nelder_mead(&rosenbrock, &run).unwrap();
        assert!(r.best_value <= 1e-8, "{}", r.best_value);
        assert!((r.best_point[0] - 1.0).abs() < 1e-4);
        assert!((r.best_point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn trace_is_monotone_and_ends_at_best() {
        let run = OptimizationRun::new(vec![-1.2, 1.0], 0.5, 300, 1e-20, 0);
        let r = nelder_mead(&rosenbrock, &run).unwrap();
        assert_eq!(r.trace.len(), r.evaluations);
        assert!(r.evaluations <= 300);
        assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best));
        assert_eq!(r.trace.last().unwrap().best, r.best_value);
        assert!(r.best_value <= r.start_value);
    }

    #[test]
    fn small_budget_rejected() {
        let run = OptimizationRun::new(vec![0.0; 4], 0.1, 5, 1e-6, 0);
        assert!(nelder_mead(&bowl, &run).is_err());
        let run = OptimizationRun::new(vec![0.0; 4], 0.1, 6, 1e-6, 0);
        let r = nelder_mead(&bowl, &run).unwrap();
        assert_eq!(r.evaluations, 6);
    }

    #[test]
    fn non_finite_objective_aborts_with_point() {
        let f = |v: &[f64]| if v[0] > 0.05 { f64::NAN } else { v[0] };
        let run = OptimizationRun::new(vec![0.0], 0.1, 50, 1e-9, 0);
        match nelder_mead(&f, &run) {
            Err(Error::NonFinite { point }) => assert_eq!(point, vec![0.1]),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_runs() {
        let run = OptimizationRun::new(vec![0.3, -0.7, 2.0], 0.2, 400, 1e-12, 9);
        let a = nelder_mead(&rosenbrock3, &run).unwrap();
        let b = nelder_mead(&rosenbrock3, &run).unwrap();
        assert_eq!(a, b);
    }

    fn rosenbrock3(v: &[f64]) -> f64 {
        rosenbrock(&v[..2]) + rosenbrock(&v[1..])
    }

    #[test]
    fn coordinate_descent_finds_bowl_minimum() {
        let run = OptimizationRun::new(vec![0.0, 0.0, 0.0], 1.0, 5000, 1e-9, 0);
        let r = coordinate_descent(&bowl, &run).unwrap();
        assert!(r.converged);
        assert!(r.best_point.iter().all(|x| (x - 3.0).abs() < 1e-6));
    }

    #[test]
    fn multi_start_single_matches_plain_run() {
        let template = OptimizationRun::new(vec![-1.2, 1.0], 0.5, 500, 1e-12, 0);
        let single = nelder_mead(&rosenbrock, &template).unwrap();
        let multi = multi_start(
            OptimizerKind::NelderMead,
            &rosenbrock,
            &template,
            1,
            1.0,
            77,
        )
        .unwrap();
        assert_eq!(multi.best, single);
        assert_eq!(multi.best_start, 0);
    }

    #[test]
    fn more_starts_never_worse() {
        let f = |v: &[f64]| (v[0] * 3.0).sin() + 0.1 * v[0] * v[0] + (v[1] - 0.5).powi(2);
        let template = OptimizationRun::new(vec![2.0, 0.0], 0.3, 200, 1e-10, 0);
        let one = multi_start(OptimizerKind::NelderMead, &f, &template, 1, 3.0, 5).unwrap();
        let five = multi_start(OptimizerKind::NelderMead, &f, &template, 5, 3.0, 5).unwrap();
        assert!(five.best.best_value <= one.best.best_value);
        assert_eq!(five.start_points[0], one.start_points[0]);
        let again = multi_start(OptimizerKind::NelderMead, &f, &template, 5, 3.0, 5).unwrap();
        assert_eq!(again, five);
    }

    #[test]
    fn ramp_values() {
        let s = ramp_schedule(1, 0.8, 0.3).unwrap();
        assert_eq!((s.betas()[0], s.gammas()[0]), (0.8, 0.3));
        let s = ramp_schedule(2, 1.0, 1.0).unwrap();
        assert_eq!(s.betas(), &[1.0, 0.5]);
        assert_eq!(s.gammas(), &[0.5, 1.0]);
        for p in 1..20 {
            let s = ramp_schedule(p, 0.7, 0.02).unwrap();
            assert!(s.betas().windows(2).all(|w| w[1] <= w[0]));
            assert!(s.gammas().windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(ramp_schedule::<f64>(0, 1.0, 1.0).is_err());
    }
}
