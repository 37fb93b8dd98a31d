//! Jigsaw-puzzle solver attack and assembly metrics.

mod metrics;
mod protocol;
mod solver;

pub use metrics::{
    direct_comparison, largest_component, neighbor_comparison, psnr, AssemblyResult, MetricsReport, Placement,
};
pub use protocol::{
    attack_encrypted, attack_image, attack_trial_protocol, keysets_from_seed, ProtocolReport, DEFAULT_TRIALS,
};
pub use solver::{greedy_assemble, pairwise_compatibility, Side, SolverMode};
