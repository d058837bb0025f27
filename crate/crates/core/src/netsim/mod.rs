//! Deterministic discrete-event simulation of the full pipeline: clients
//! feed collector clusters, consensus orders collections into blocks,
//! executors chunk and compute them, verifiers sample and check chunks,
//! and the committee seals results and adjudicates challenges. Identical
//! configuration and seed reproduce a bit-identical run report.

pub mod config;
pub mod report;
mod run;

pub use config::{AdversaryAssignment, AdversaryStrategy, ConfigError, Expectations, ScenarioConfig};
pub use report::{
    ChallengeOutcomeRecord, CollectionFate, CoverageRecord, FaultRecord, MccRecord, RunReport,
    SlashingRecord,
};
pub use run::{form_clusters, run_scenario, run_scenario_with_chain, sample_delay, scenario_workload, Simulation};
