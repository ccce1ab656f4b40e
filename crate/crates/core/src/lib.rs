//! Numerical toolkit for Boltzmann collision kernels of inverse-power-law
//! potentials U(r) = 1/r^{s-1}, their hard-sphere limit, the grazing-angle
//! singular layer, and a DSMC solver for the spatially homogeneous
//! Boltzmann equation.

pub mod error;
pub mod numerics;
pub mod kernel;
pub mod scattering;
pub mod sim;
pub mod singular_layer;
pub mod special;

pub use error::{Error, Result};
