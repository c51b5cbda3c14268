pub mod acceptance;
pub mod bloch;
pub mod cli;
pub mod damping;
pub mod decayfit;
pub mod error;
pub mod evolve;
pub mod fields;
pub(crate) mod kernel;
pub mod linalg;
pub mod semigroup_lab;
pub(crate) mod spectral;
pub mod table;

pub use error::{Error, Result};
