//! The variational loop: optimize `E(beta, gamma)` over a cost diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{
    multi_start, ramp_schedule, MultiStartResult, OptimizationRun, OptimizerKind,
};
use crate::scalar::Scalar;
use crate::simulator::{evolve, CostDiagonal, QaoaSchedule, Statevector};

/// How the optimizer sees `E`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ExpectationMode {
    /// `<psi| H |psi>` computed from the amplitudes.
    #[default]
    Exact,
    /// Mean energy over `shots` seeded measurements.
    Shots { shots: usize, seed: u64 },
}

/// `E` as a function of the `[betas.., gammas..]` decision vector.
pub struct QaoaObjective<'a, T = f64> {
    diag: &'a CostDiagonal<T>,
    mode: ExpectationMode,
}

impl<'a, T: Scalar> QaoaObjective<'a, T> {
    pub fn new(diag: &'a CostDiagonal<T>, mode: ExpectationMode) -> Self {
        Self { diag, mode }
    }

    pub fn state(&self, x: &[T]) -> Result<Statevector<T>> {
        evolve(&QaoaSchedule::from_vector(x)?, self.diag)
    }

    /// Non-finite angles evaluate to NaN so the optimizer reports them.
    pub fn value(&self, x: &[T]) -> T {
        let Ok(state) = self.state(x) else {
            return T::nan();
        };
        match self.mode {
            ExpectationMode::Exact => state.expectation(self.diag),
            ExpectationMode::Shots { shots, seed } => state
                .estimate_expectation(self.diag, shots, seed)
                .unwrap_or_else(|_| T::nan()),
        }
    }
}

/// Multiple of `1 / (mean - min)` used as the default `gamma_max`.
pub const GAMMA_SCALE: f64 = 8.0;

/// Ramp amplitudes derived from the diagonal: `beta_max = pi / 4` and
/// `gamma_max = 8 / (mean - min)`. Normalizing by the average energy gap above
/// the ground state makes the ramp independent of the penalty magnitude; the
/// factor places it in the adiabatic-like regime where the ramp alone already
/// concentrates weight on low-cost states for the bundled instances, short of
/// the point where the phases wrap around.
pub fn default_angle_scale<T: Scalar>(diag: &CostDiagonal<T>) -> (T, T) {
    let gap = diag.mean() - diag.min();
    let gamma = if gap > T::zero() {
        T::of(GAMMA_SCALE) / gap
    } else {
        T::one()
    };
    (T::FRAC_PI_4(), gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaSettings {
    pub depth: usize,
    pub optimizer: OptimizerKind,
    /// Evaluations per start; `None` means `500 * depth`. Zero skips the
    /// optimizer and keeps every angle at zero, i.e. the uniform state.
    pub budget: Option<usize>,
    pub tolerance: f64,
    pub starts: usize,
    pub seed: u64,
    /// Start-point jitter in units of the per-coordinate step.
    pub perturbation: f64,
    /// Ramp amplitudes; `None` picks [`default_angle_scale`].
    pub beta_max: Option<f64>,
    pub gamma_max: Option<f64>,
    pub mode: ExpectationMode,
}

impl Default for QaoaSettings {
    fn default() -> Self {
        Self {
            depth: 1,
            optimizer: OptimizerKind::NelderMead,
            budget: None,
            tolerance: 1e-6,
            starts: 1,
            seed: 0,
            perturbation: 1.0,
            beta_max: None,
            gamma_max: None,
            mode: ExpectationMode::Exact,
        }
    }
}

impl QaoaSettings {
    pub fn budget(&self) -> usize {
        self.budget.unwrap_or(500 * self.depth)
    }
}

#[derive(Clone, Debug)]
pub struct QaoaSolution<T = f64> {
    pub schedule: QaoaSchedule<T>,
    /// Exact `E` of the final state, whatever mode drove the optimizer.
    pub energy: T,
    pub state: Statevector<T>,
    pub start_schedule: QaoaSchedule<T>,
    pub search: Option<MultiStartResult<T>>,
}

/// Ramp start, multi-start optimization, then the final state.
///
/// A zero budget returns the all-zero schedule without consulting the
/// optimizer; `start_schedule` still reports the ramp it would have used.
pub fn solve<T: Scalar>(
    diag: &CostDiagonal<T>,
    settings: &QaoaSettings,
) -> Result<QaoaSolution<T>> {
    if settings.depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let (beta_def, gamma_def) = default_angle_scale(diag);
    let beta_max = settings.beta_max.map(T::of).unwrap_or(beta_def);
    let gamma_max = settings.gamma_max.map(T::of).unwrap_or(gamma_def);
    let start_schedule = ramp_schedule(settings.depth, beta_max, gamma_max)?;
    let objective = QaoaObjective::new(diag, settings.mode);

    let (schedule, search) = if settings.budget() == 0 {
        let zeros = vec![T::zero(); settings.depth];
        (QaoaSchedule::new(zeros.clone(), zeros)?, None)
    } else {
        let p = settings.depth;
        let step_beta = beta_max * T::of(0.1);
        let step_gamma = gamma_max * T::of(0.1);
        let steps = std::iter::repeat_n(step_beta, p)
            .chain(std::iter::repeat_n(step_gamma, p))
            .collect();
        let template = OptimizationRun {
            start: start_schedule.to_vector(),
            steps,
            budget: settings.budget(),
            tolerance: T::of(settings.tolerance),
            seed: settings.seed,
        };
        let f = |x: &[T]| objective.value(x);
        let result = multi_start(
            settings.optimizer,
            &f,
            &template,
            settings.starts.max(1),
            T::of(settings.perturbation),
            settings.seed,
        )?;
        (
            QaoaSchedule::from_vector(&result.best.best_point)?,
            Some(result),
        )
    };
    let state = evolve(&schedule, diag)?;
    let energy = state.expectation(diag);
    Ok(QaoaSolution {
        schedule,
        energy,
        state,
        start_schedule,
        search,
    })
}
