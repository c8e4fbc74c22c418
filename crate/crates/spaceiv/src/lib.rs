//! File formats, benchmark driver and command-line interface on top of `spaceiv-core`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod genericity;
pub mod io;

pub use error::{Error, Result};
