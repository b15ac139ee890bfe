//! Library half of the `vlmc-walks` binary: configuration parsing and the
//! subcommand implementations.

pub mod commands;
pub mod config;
mod csvout;
