//! Numerical laboratory for nonlinear equations that carry both soliton
//! solutions and a period-doubling route to chaos.
//!
//! The crate is organised around the two halves of that story:
//!
//! * [`maps`] iterates the quadratic family `1 - mu x^2` and the sine family
//!   `lambda sin(pi x)`, locating the period-doubling cascade and measuring
//!   Lyapunov exponents.
//! * [`reductions`] turns each continuum equation into a quadrature ODE
//!   `phi'^2 = P(phi)` and into its associated difference map.
//! * [`closed_forms`] catalogues the claimed closed-form solutions and audits
//!   every one of them against its governing equation.
//! * [`ode`] and [`pde`] integrate the reduced ODEs and evolve the PDEs on
//!   periodic grids.
//! * [`classify`] combines the map analysis with the soliton existence
//!   condition into a per-equation regime report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod closed_forms;
pub mod error;
pub mod format;
pub mod maps;
pub mod ode;
pub mod pde;
pub mod reductions;

pub use classify::{chaos_onset, regime_report, region_table, ChaosOnset, Regime, RegimeReport};
pub use closed_forms::{audit_catalog, ClosedFormEntry, FormId, ResidualReport, Variant};
pub use error::{Error, Result};
pub use maps::{MapFamily, MapSpec, Orbit, PeriodResult};
pub use ode::Trajectory;
pub use pde::{EvolveConfig, FieldState};
pub use reductions::{EquationSpec, Family, QuadratureOde};
