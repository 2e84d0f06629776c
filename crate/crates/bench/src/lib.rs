//! Configuration, problem setup, solver dispatch and trace output for the `sapd` command.

pub mod commands;
pub mod config;
pub mod plan;
pub mod problems;
pub mod runner;
pub mod sgda;
pub mod trace;

pub use config::RunConfig;
