//! Benchmark harness for the covariance estimators: experiment
//! configuration, deterministic parallel trial execution, and CSV/SVG
//! result emission.

pub mod config;
pub mod output;
pub mod runner;
