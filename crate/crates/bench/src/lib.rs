//! Benchmark harness for the sdca-admm solver: experiment configuration,
//! repeat orchestration, excess-risk anchoring against a cached reference
//! optimum, and CSV trace output.

pub mod experiment;
pub mod metrics;

pub use experiment::{
    run_experiment, EdgeSource, ExperimentConfig, ExperimentOutput, ProblemSpec, RegConstants,
    SolverSettings, TraceRow,
};
pub use metrics::compute_test_metrics;
