//! Scenario runner and check matrix on top of `lightray-core`.

pub mod checks;
pub mod criteria;
pub mod demo;
pub mod error;
pub mod fixtures;
pub mod oracles;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use report::Report;
pub use scenario::Scenario;
