pub mod error;
pub mod field;
pub mod filter;
pub mod lattice;
pub mod lawton;
pub mod persist;
pub mod scaling;
mod sum;
pub mod verify;
pub mod wavelet;

pub use error::{Error, Result};
