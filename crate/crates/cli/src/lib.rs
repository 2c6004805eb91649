//! The `community-pulse` command-line tool.

pub mod catalog;
pub mod commands;
pub mod output;
