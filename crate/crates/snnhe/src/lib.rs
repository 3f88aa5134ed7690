//! File formats, fixtures, reports and the command-line operations around
//! the `snnhe-core` inference engine.

pub mod commands;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod keys;
pub mod report;

pub use error::{Error, Result};
