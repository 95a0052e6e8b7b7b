//! Configuration, pipeline and file output behind the `riskshare` binary.

pub mod config;
pub mod error;
pub mod format;
pub mod output;
pub mod pipeline;
pub mod report;

pub use config::{load, Market, MarketConfig, Overrides, TieRuleSpec};
pub use error::CliError;
pub use pipeline::{oracle_check, run, Outcome};
pub use report::{OracleReport, RunReport, Status, Timings};
