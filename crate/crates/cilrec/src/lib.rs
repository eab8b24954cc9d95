//! Command-line harness around `cilrec-core`: feature-store files, run
//! configuration, experiment grids, published-table fixtures and report
//! files.

pub mod config;
pub mod fixtures;
pub mod grid;
pub mod report;
pub mod store;
