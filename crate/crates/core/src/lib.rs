//! Numerical laboratory for Navier–Stokes a-priori estimates in Grand
//! Lebesgue and moment rearrangement-invariant spaces.
//!
//! The crate is layered bottom-up: [`specfun`] and [`constants`] evaluate the
//! closed-form constants, [`field`] and [`spectral`] provide periodic fields
//! and Fourier multipliers, [`psi`] builds the norm functionals, [`solver`]
//! integrates the projected equations and [`verify`] turns runs into
//! per-estimate reports.

pub mod constants;
pub mod error;
pub mod field;
pub mod initial;
pub mod psi;
pub mod snapshot;
pub mod solver;
pub mod specfun;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
