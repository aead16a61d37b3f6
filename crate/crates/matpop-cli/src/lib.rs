//! Library surface of the CLI so integration tests can drive the command
//! implementations directly as well as through the binary.

pub mod commands;
pub mod config;
pub mod csvio;
