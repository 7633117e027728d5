//! Command-line harness around `transit-lab`: experiment manifests,
//! provenance headers, atomic output and the validation suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod provenance;
pub mod suite;
