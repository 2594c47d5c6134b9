//! Batched multi-armed bandit experiments with uniform, Thompson Sampling
//! and hybrid (TS†) allocation.
//!
//! A week's cohort is split between the active policies, each policy
//! assigns its share of students to arms, opens are drawn from the true
//! arm means, and posteriors update once per week. The same update path
//! replays recorded logs, and [`analysis`] reproduces the cumulative
//! summaries and pairwise Wald tests used to compare arms.

pub mod analysis;
pub mod engine;
pub mod environment;
pub mod io;
pub mod model;
pub mod normal;
pub mod policies;
pub mod replicate;
pub mod rng;
pub mod sampling;

pub use analysis::{ArmSummary, WaldResult};
pub use engine::{replay, run_experiment, ExperimentTrace};
pub use model::{
    validate_config, ArmId, BatchObservation, BetaParams, ConfigDraft, EnvironmentSchedule,
    ExperimentConfig, PolicyId, Week,
};
