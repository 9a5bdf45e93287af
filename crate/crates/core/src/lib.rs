pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod grid;
pub mod laws;
pub mod mc;
pub mod model;
pub mod pricing;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
