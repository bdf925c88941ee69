//! Reproducible experiment runner for the isinglab percolation laboratory.
//!
//! The crate is a thin orchestration layer over the `isinglab` library: it
//! parses flat `key = value` experiment configs, dispatches the estimator
//! pipelines, persists bit-exact CSV/JSON outputs, merges summaries into
//! scaling tables, and houses the verification suite that checks the build
//! against exact enumeration and the statistical acceptance battery.

pub mod config;
pub mod experiment;
pub mod output;
pub mod report;
pub mod verify;
