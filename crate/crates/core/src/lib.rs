//! Vehicle routing as QUBO/Ising Hamiltonians, solved with QAOA on an exact
//! statevector simulator and checked against exhaustive classical search.
//!
//! The pipeline:
//! 1. [`instance`]: a validated `(n, k)` routing instance and the one-bit-per-
//!    directed-edge configuration space, with decoding into routes and
//!    subtours.
//! 2. [`encoder`]: the penalty Hamiltonian as a QUBO, its Ising form, and
//!    both serialized as JSON documents.
//! 3. [`oracle`]: exhaustive ground states, degree-feasible minima and
//!    route-optimal enumeration.
//! 4. [`simulator`]: cost diagonals, statevectors, layered evolution and
//!    seeded sampling.
//! 5. [`optimizer`] and [`qaoa`]: Nelder-Mead or coordinate descent over the
//!    `(beta, gamma)` schedule from a ramp start.
//! 6. [`experiment`]: configurations, reports and the bundled experiments.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision choices.
//!
//! ```
//! use qaoa_vrp::{build_qubo, default_penalty, exhaustive_ground_state, preset, Instance};
//!
//! let inst: Instance = preset("vrp-4-2").unwrap();
//! let qubo = build_qubo(&inst, default_penalty(&inst)).unwrap();
//! let ground = exhaustive_ground_state(&qubo).unwrap();
//! assert_eq!(ground.argmin, vec![779, 2125]);
//! ```

pub mod encoder;
pub mod error;
pub mod experiment;
pub mod instance;
pub mod optimizer;
pub mod oracle;
pub mod qaoa;
pub mod scalar;
pub mod simulator;

pub use encoder::{build_qubo, build_qubo_closed_form, default_penalty, qubo_to_ising};
pub use error::{Error, Result};
pub use instance::{classify, decode, preset, Configuration, FeasibilityClass};
pub use oracle::{degree_feasible_minimum, exhaustive_ground_state, optimal_routes};
pub use qaoa::solve;
pub use scalar::Scalar;
pub use simulator::{evolve, init_plus};

pub type Instance = instance::ProblemInstance<f64>;
pub type Instance32 = instance::ProblemInstance<f32>;
pub type Qubo = encoder::QuboModel<f64>;
pub type Qubo32 = encoder::QuboModel<f32>;
pub type Ising = encoder::IsingModel<f64>;
pub type Ising32 = encoder::IsingModel<f32>;
pub type Diagonal = simulator::CostDiagonal<f64>;
pub type Diagonal32 = simulator::CostDiagonal<f32>;
pub type Schedule = simulator::QaoaSchedule<f64>;
pub type Schedule32 = simulator::QaoaSchedule<f32>;
pub type State = simulator::Statevector<f64>;
pub type State32 = simulator::Statevector<f32>;
pub type GroundState = oracle::GroundStateReport<f64>;
pub type Solution = qaoa::QaoaSolution<f64>;
