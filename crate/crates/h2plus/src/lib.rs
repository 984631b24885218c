//! File formats, parallel drivers and the command-line front end around
//! [`h2plus_core`].

pub mod config;
pub mod drivers;
pub mod error;
pub mod io;

pub use error::{Error, Result};
pub use h2plus_core as core;
