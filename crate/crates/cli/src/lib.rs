//! Scenario files, shipped presets and run directories for `phaseflow`.

pub mod compare;
pub mod config;
pub mod export;
pub mod output;
pub mod presets;
pub mod run;
pub mod summary;

pub use config::{Config, ConfigError};
pub use run::{execute, RunOutcome};
