//! Scenario generation and the experiment sweeps behind the CLI.

pub mod config;
pub mod experiments;
pub mod scenario;
pub mod selftest;

pub use config::{model_size_mb, ModelChoice, ScenarioConfig, MODEL_CATALOG};
pub use experiments::{
    run_latency_sweep, run_model_sweep, run_overhead_sweep, run_point, write_audit_csv, write_csv,
    ExperimentResult, Method, RunOptions,
};
pub use scenario::{generate_topology, grid_positions};
