//! Simulation and numerical verification toolkit for random walks in the
//! domain of attraction of a stable law, their functionals under constraints
//! on the terminal value, and critical branching processes in random environment.
//!
//! The numeric core ([`stable`], [`quadrature`], [`walk`]) is generic over the
//! scalar type; Monte Carlo estimators work in `f64`. Concrete aliases for the
//! common instantiations live at the crate root.

pub mod bpre;
pub mod error;
pub mod functionals;
pub mod increments;
pub mod quadrature;
pub mod renewal;
pub mod replicas;
pub mod rng;
pub mod scalar;
pub mod stable;
pub mod walk;

pub use error::{Error, Result};
pub use functionals::{ConstraintSpec, Functional, RatioReport, TheoremId};
pub use rng::RandomStream;
pub use scalar::{Real, WalkScalar};
pub use increments::{IncrementKind, IncrementModel};
pub use renewal::{Propagated, RenewalKind, RenewalSet, RenewalTable};
pub use replicas::{Budget, Estimate};
pub use stable::{Inverted, ScalingSequence, StableParams};
pub use walk::{PathSummary, Walker};

pub type StableParams64 = StableParams<f64>;
pub type StableParams32 = StableParams<f32>;
pub type ScalingSequence64 = ScalingSequence<f64>;
pub type IncrementModel64 = IncrementModel<f64>;
pub type PathSummary64 = PathSummary<f64>;
