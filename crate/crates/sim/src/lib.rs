//! Simulated semantic exploration: environments, noisy scans, the
//! exploration loop, artifact manifests and the resolution benchmark.

pub mod bench;
pub mod config;
pub mod env;
pub mod experiment;
pub mod metrics;
pub mod simulate;

pub use config::{ConfigError, ExperimentConfig, StrategyName};
pub use env::{BoxWorld, Environment};
pub use experiment::{run, run_to_dir, verify, Manifest, RunError, RunResult};
