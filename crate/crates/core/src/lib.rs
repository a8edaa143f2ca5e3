//! Self-consistent localized solutions of a reduced radial spinor system.
//!
//! The crate solves the pair `(u, v)` together with the eigenvalue `k` at
//! a fixed coupling `a`, searches `a` for the soliton condition `k = 1`,
//! and evaluates the functionals and closed-form moving-state relations
//! built on the result.

pub mod banded;
pub mod dispersion;
pub mod error;
pub mod functional;
pub mod grid;
pub mod io;
pub mod model;
pub mod scan;
pub mod solver;

pub use error::{Error, Result};
pub use functional::{energy_report, kinetic_t, potential_pi, EnergyReport};
pub use grid::{Grid, GridSpec};
pub use model::{density, potential, trial_functions, Density, SelfField, SpinorPair};
pub use scan::{find_a0, verify_extremum, KSample, ScanConfig, ScanResult};
pub use solver::{solve_fixed_a, IterationState, SolverConfig};
