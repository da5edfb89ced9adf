//! Spin-S Landau-Zener transitions in a swept field with fast random
//! components: closed-form noise-averaged theory and a Monte Carlo oracle.

pub mod adiabatic;
pub mod error;
pub mod lz;
pub mod noise;
pub mod propagator;
pub mod quadrature;
pub mod special;
pub mod spin;
pub mod stats;
pub mod tables;
pub mod theory;

pub use error::{Error, Result};
