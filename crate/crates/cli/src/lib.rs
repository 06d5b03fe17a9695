//! File formats, the replicate benchmark and the `mdgp` command line on top
//! of [`mdgp_core`].

pub mod bench;
pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;
pub mod formats;
pub mod grid;

pub use error::{Error, Result};
