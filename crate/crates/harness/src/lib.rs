//! Configuration, orchestration and output for the `sympatric` models.
//!
//! [`config::ExperimentConfig`] describes a run, [`run::run_experiment`]
//! executes it, and [`csv`] and [`svg`] hold the artifact writers. The
//! `speciate` binary is a thin command-line layer over these.

pub mod config;
pub mod csv;
pub mod recipes;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
pub use run::{run_experiment, verify, RunOptions, RunOutcome};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
struct Book;
