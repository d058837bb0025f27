//! Structured record of one simulation run, serialized as JSON for the
//! command-line reporting and the test suites.

use crate::challenges::Verdict;
use crate::crypto::HashValue;
use crate::messages::{Role, SlashReason, StateCommitment};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlashingRecord {
    pub role: Role,
    pub index: u32,
    pub amount: u64,
    pub reason: SlashReason,
    pub height: u64,
}

/// One injected computation fault and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub height: u64,
    pub result_hash: HashValue,
    pub executor_index: u32,
    pub chunk_index: u32,
    /// A verifier challenged the chunk.
    pub detected: bool,
    /// The challenge was upheld and the executor slashed.
    pub executor_slashed: bool,
    /// The corrupted result ended up sealed.
    pub sealed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeOutcomeRecord {
    pub challenge_hash: HashValue,
    pub verdict: Verdict,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccRecord {
    pub collection_hash: HashValue,
    pub resolved: bool,
    pub skippable: bool,
    pub cluster_slashed: bool,
    pub attestation_count: u32,
}

/// Per-chunk count of honest verifiers that selected the chunk, for the
/// reference executor's result at one height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub height: u64,
    pub result_hash: HashValue,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionFate {
    Executed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub master_seed: u64,
    /// Proposal rounds actually run.
    pub rounds: u64,
    pub payload_blocks: u64,
    pub sealed_payload_blocks: u64,
    pub all_payload_sealed: bool,
    /// (height, proposal round the seal landed in, lag in rounds).
    pub seal_lags: Vec<(u64, u64, u64)>,
    pub max_seal_lag: u64,
    /// Heights sealed, in order, with the sealed result hash.
    pub sealed_chain: Vec<(u64, HashValue)>,
    /// Final state commitment of the highest sealed result.
    pub final_state: Option<StateCommitment>,
    pub slashings: Vec<SlashingRecord>,
    pub faults: Vec<FaultRecord>,
    pub challenge_outcomes: Vec<ChallengeOutcomeRecord>,
    pub mcc: Vec<MccRecord>,
    pub honest_coverage: Vec<CoverageRecord>,
    /// Approvals received but rejected at validation, per verifier.
    pub rejected_approvals: Vec<(Role, u32, u64)>,
    pub collection_fates: Vec<(HashValue, CollectionFate)>,
    pub receipts_seen: u64,
    pub approvals_seen: u64,
    /// Verification attempts abandoned because chunk data could not be
    /// fetched or failed its hash check (distinct from computation
    /// faults).
    pub data_unavailable_events: u64,
    pub events_processed: u64,
    pub end_time: u64,
    pub stalled: bool,
    /// True iff a node with no adversary strategy lost stake.
    pub honest_node_slashed: bool,
    /// Expectation violations, empty on a clean run.
    pub expectation_failures: Vec<String>,
}

impl RunReport {
    pub fn detection_rate(&self) -> f64 {
        if self.faults.is_empty() {
            return 0.0;
        }
        self.faults.iter().filter(|f| f.detected).count() as f64 / self.faults.len() as f64
    }
}
