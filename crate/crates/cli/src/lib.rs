//! Scenario-driven front end: load a TOML scenario, run one of the
//! `analyze`, `synthesize`, `simulate`, `verify` or `reproduce-example`
//! commands, and write JSON reports and CSV trajectories.

pub mod app;
pub mod commands;
pub mod output;
pub mod scenario;

pub use app::{run, ExitStatus};
pub use scenario::{Overrides, Scenario};
