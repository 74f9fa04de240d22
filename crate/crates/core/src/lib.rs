//! Lyapunov stability of equilibria of finite-dimensional Poisson systems.
//!
//! The crate decides stability through the non-Hausdorff structure of the
//! leaf space: a T₂-set around the equilibrium, the tame/wild split of its
//! generator `dh(x_e)`, and Hessian tests on smoothings of the T₂-set with
//! Casimir corrections. Verdicts can be checked against numerical
//! integration, confinement probes and A-stability cone monitors.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the worker pool
//! and the command line live in the companion `poisson-stab-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod catalog;
pub mod dynamics;
pub mod expr;
pub mod leafspace;
pub mod linalg;
pub mod poisson;
pub mod sample;
pub mod stability;

pub use algebra::{LieAlgebra, TransverseData};
pub use catalog::{CatalogEntry, CatalogError};
pub use dynamics::{integrate, probe, TrajectoryRecord};
pub use expr::{ExprError, Expression, Params};
pub use leafspace::{GeneratorClassification, T2Description};
pub use poisson::{HamiltonianSystem, PoissonKind, PoissonStructure};
pub use stability::{analyze, StabilityVerdict, VerdictValue};
