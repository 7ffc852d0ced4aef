//! Command-line harness for memorization-guided graph unlearning: config
//! loading, pipeline-stage subcommands, the end-to-end experiment runner,
//! and hashed artifact manifests.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod manifest;
