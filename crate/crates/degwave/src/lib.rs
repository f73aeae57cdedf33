//! Numerical toolkit for the one-dimensional degenerate/singular wave
//! equation u_tt = (x^a u_x)_x + mu x^{a-2} u on (0,1): weighted Hardy-type
//! inequalities, energy-conserving time integration, boundary observability
//! measurements, and HUM boundary control synthesis.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod family;
pub mod grid;
pub mod hardy;
pub mod operator;
pub mod params;
pub mod runner;
pub mod tridiag;

pub use error::{DegwaveError, Result};
pub use grid::{build_grid, GridFunction, GridSpec};
pub use params::{mu_critical, Parameters, Regime};
