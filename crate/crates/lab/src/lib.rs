//! Command-line laboratory for zero-noise selection experiments.
//!
//! Wraps `zeronoise-core` with JSON configuration, CSV/JSON artifacts, a
//! multi-threaded ensemble runner and pinned reproduction runs with
//! pass/fail verdicts.

pub mod cli;
pub mod config;
pub mod io;
pub mod reproduce;
pub mod runner;
pub mod verdict;
