//! Lagrangian simulator and verification toolkit for one-dimensional
//! Boussinesq-type models with a sign-changing velocity kernel.
//!
//! * [`model`]: parameters, initial data, marker state, frame maps.
//! * [`biotsavart`]: velocity and its derivatives from the marker field.
//! * [`solver`]: adaptive time stepping, marker refinement, run driver.
//! * [`diagnostics`]: blow-up indicators and comparison checks.
//! * [`oracles`]: independent solutions of the auxiliary comparison problems.

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biotsavart;
pub mod diagnostics;
pub mod error;
pub mod interp;
pub mod model;
pub mod ode;
pub mod oracles;
pub mod solver;

pub use error::{Error, Result};
pub use model::{build_initial_state, make_params, Frame, InitialDataSpec, LagrangianState, ModelParams};
