//! Rank-constrained continuous fields of positive matrices over sampled
//! simplicial complexes, and realization of rank functions on recursive
//! subhomogeneous algebras.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod extension;
pub mod homotopy;
pub mod matcalc;
pub mod realize;
pub mod rsh;
pub mod space;

pub use config::Tolerances;
pub use error::{Error, Result};
