//! Forward model, adjoint gradients and L^p/L^inf reconstruction for
//! frequency-domain fluorescent optical tomography on box domains.

pub mod adjoint;
pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod inverse;
pub mod phantom;
pub mod robin;

pub use error::{Error, Result};
