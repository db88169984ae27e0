//! Adaptive learning dynamics in finite congestion games.
//!
//! The model: `N` drivers repeatedly pick one of `M` parallel routes with
//! Logit probabilities driven by their private travel-time estimates, observe
//! the realized travel time of the chosen route, and fold it into the
//! estimate with a decreasing step size. This crate implements the discrete
//! stochastic process, its mean-field ODE, rest-point computation and
//! Routh-Hurwitz stability classification, plus the complete equilibrium
//! theory for the 2x2 case (scalar reduction, equilibrium counting and
//! ordering, heteroclinic orbits, symmetric-player stability boundary).

pub mod error;
pub mod game;
pub mod mean_field;
pub mod stability;
pub mod stochastic;
pub mod two_by_two;

pub use error::Error;
pub use game::{ChoiceProfile, EstimateProfile, TrafficGame, UniquenessBound};
pub use mean_field::{RestPoint, TerminalFlag, Trajectory};
pub use stability::{CharPoly, JacobianMatrix, RestPointReport, StabilityVerdict};
pub use stochastic::{SimulationRun, StepSchedule};
pub use two_by_two::{FixedPointCase, FixedPointReport, ReducedGame2x2, SymmetricReport};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
