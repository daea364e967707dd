//! Sub-supersolution machinery for singular quasilinear elliptic systems
//! driven by p-Laplacians with gradient-dependent right-hand sides.
//!
//! The pipeline is: build a [`domain::Grid`], solve the auxiliary torsion-type
//! problems and calibrate the barrier multiplier ([`barriers`]), iterate the
//! truncated solution operator ([`fixedpoint`]) and check the result
//! independently ([`verify`]).

pub mod barriers;
pub mod config;
pub mod domain;
pub mod error;
pub mod fixedpoint;
pub mod plap;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
