//! Deterministic transport of charged particles in the continuous slowing-down
//! approximation, solved by the method of characteristics with source
//! iteration for the elastic-scattering gain.

pub mod angular;
pub mod benchmark;
pub mod config;
pub mod error;
pub mod grid;
pub mod iteration;
pub mod multispecies;
pub mod observables;
pub mod output;
pub mod physics;
pub mod run;
pub mod sweep;

pub use error::{Error, Result};
