//! Monte Carlo sampling beyond enumeration scale.

pub mod chain;
pub mod clusters;
pub mod experiments;
pub mod stats;

pub use chain::{rng_stream, run_chain, run_chain_with, Algorithm, Chain, ChainConfig, ChainSummary, UpdateStats, RNG_NAME};
pub use clusters::{
    a_sequence, cluster_diagnostics, default_b, minus_boundary_cluster, restricted_cluster, s_sequence, shell_trace,
    ClusterDiagnostics, ShellSequence, DEFAULT_B_STAR,
};
pub use experiments::{magnetization_probe, penetration_experiment, ChainParams, PenetrationResult};
pub use stats::{wilson_interval, Estimate};
