//! Operator CLI and HTTP server for the arena.

pub mod commands;
pub mod config;
pub mod error;
pub mod http;

pub use commands::run;
pub use error::CliError;
