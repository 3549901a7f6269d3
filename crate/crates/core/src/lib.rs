//! Numerical laboratory for the sharp one-dimensional Gagliardo-Nirenberg-Sobolev
//! inequalities: closed-form constants, transport duality, nonlinear diffusion
//! flows with their Lyapunov functionals, and the associated identities.

pub mod constants;
pub mod error;
pub mod grid;
pub mod special;

pub use constants::{constants_for, ConstantsTable, GNParams, Regime};
pub use error::{Error, Result};
pub use grid::{GridFunction, WeightedGrid};
pub mod closed_forms;
pub mod functionals;
pub mod flow;
pub mod dual_flows;
pub mod identity_lab;
pub mod duality;
pub mod cli;
