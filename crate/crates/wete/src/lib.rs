//! File formats, checkpoints, run configuration and the command-line
//! front end for [`wete_core`].

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod fmt;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, Result};
