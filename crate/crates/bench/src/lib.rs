//! Experiment harness for the tabular VA-learning laboratory: configuration,
//! seed-parallel runs, epsilon sweeps, the certification suite, the two-state
//! walkthrough and bundle generation. The `valab` binary is a thin CLI over
//! this library.

pub mod config;
pub mod demo;
pub mod experiment;
pub mod generate;
pub mod stats;
pub mod verify;
