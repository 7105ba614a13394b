//! Planar ion crystals in a rotating-frame trap: equilibrium structure,
//! transverse normal modes, drive-engineered spin-spin couplings, and the
//! collective-spin echo dynamics used to benchmark them.
//!
//! The usual pipeline is trap configuration -> crystal equilibrium -> mode
//! spectrum -> coupling matrix -> range fits or spin sequences; see the
//! module docs for the formulas each stage implements.

pub mod calib;
pub mod constants;
pub mod error;
pub mod ising;
pub mod io;
pub mod modes;
pub mod spin;
pub mod trap;

pub use error::{Error, Result};
