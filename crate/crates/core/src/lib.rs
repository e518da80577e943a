pub mod cli;
pub mod config;
pub mod corpus;
pub mod criteria;
pub mod envelope;
pub mod error;
pub mod expr;
pub mod integrator;
pub mod quadrature;
pub mod riccati;
pub mod system;
pub mod volterra;

pub use error::{Error, Label, Result};
