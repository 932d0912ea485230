pub mod blocks;
pub mod cli;
pub mod convergence;
pub mod environment;
pub mod error;
pub mod graphical;
pub mod lattice;
pub mod renorm;
pub mod stats;

pub use error::{Error, Result};
