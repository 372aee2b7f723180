pub mod data;
pub mod error;
pub mod experiments;
pub mod flows;
pub mod hamiltonians;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
