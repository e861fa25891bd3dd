//! Config-driven runner for synthetic frequency lattice experiments.
//!
//! Each subcommand reads a TOML config, fills unspecified keys from a
//! per-experiment preset, runs the protocol and writes CSV, JSON and
//! optional SVG files plus a `manifest.json` listing all of them.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod viridis;

pub use commands::{cmd_run, RunManifest, TOOL_VERSION};
pub use config::{parse_config, parse_config_str, Command, Overrides, ResolvedConfig};
pub use error::{CliError, CliResult};
