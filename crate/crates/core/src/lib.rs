//! Numerical laboratory for the free energy of Bayesian tensor-product
//! inference and its Hamilton-Jacobi limit on the cone of positive
//! semidefinite matrices.

pub mod coneconjugate;
pub mod error;
pub mod estimate;
pub mod gibbs;
pub mod hopf;
pub mod nonlinearity;
pub mod rng;
pub mod symcone;

pub use error::{HjError, Result};
