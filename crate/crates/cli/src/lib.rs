//! Scenario files, run orchestration and deterministic output for the spin-splitter
//! simulations. The `spinsplit` binary is a thin clap front end over this library.

pub mod commands;
pub mod output;
pub mod scenario_file;

pub use scenario_file::{parse_scenario, parse_scenario_str, Overrides, ScenarioError, ScenarioSpec};

use std::path::PathBuf;

/// Directory holding the bundled scenarios.
pub fn bundled_scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Path of a bundled scenario by stem, e.g. `bundled_scenario("fig2")`.
pub fn bundled_scenario(stem: &str) -> PathBuf {
    bundled_scenario_dir().join(format!("{stem}.scenario"))
}
