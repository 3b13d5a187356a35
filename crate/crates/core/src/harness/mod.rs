//! Scenario configuration, drivers and result writers behind the `freefrac` CLI.

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{log_grid, MicrostateParams, SampleCounts, Scenario, ScenarioConfig, SCHEMA_VERSION};
pub use output::{write_outputs, Format, Manifest, ResultRow, RowSink};
pub use scenarios::*;
