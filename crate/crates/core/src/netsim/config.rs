//! Scenario configuration: node counts, stakes, protocol parameters,
//! adversary assignments, workload shape, and run expectations. Loaded
//! from JSON; every field has a default so fixtures stay terse.

use crate::messages::Role;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

/// Behavior assigned to one node for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// Publishes receipts with one corrupted chunk per block. The fault is
    /// a register perturbation mid-chunk; execution continues honestly
    /// from the perturbed state, so exactly one chunk fails re-execution.
    FaultyExecutor {
        #[serde(default = "default_true")]
        respond_to_challenges: bool,
        /// Grind the fault location into a chunk covered by a colluding
        /// verifier's assignment.
        #[serde(default)]
        target_colluders: bool,
    },
    /// Collector that signs guarantees but never serves collection text,
    /// and attests against challenged collections it does not guarantee.
    WithholdingCluster,
    /// Verifier that skips re-execution and copies the executor's
    /// trace-secret proofs into its approvals.
    LazyVerifier,
    /// Verifier that files a fabricated computation challenge against
    /// every result it sees instead of approving.
    SpuriousChallenger,
    /// Verifier that approves its partner executor's results without
    /// checking, using trace secrets leaked by the partner.
    ColludingVerifier { partner_executor: u32 },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryAssignment {
    pub role: Role,
    pub index: u32,
    pub strategy: AdversaryStrategy,
}

/// Pass/fail expectations a scenario fixture pins for the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    /// Every payload block must end up sealed.
    #[serde(default)]
    pub all_payload_sealed: bool,
    /// Ceiling on how many proposal rounds a block may wait for its seal.
    #[serde(default)]
    pub max_seal_lag_rounds: Option<u64>,
    /// No node without an adversary strategy may lose stake.
    #[serde(default)]
    pub no_honest_slashing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub master_seed: u64,
    pub collectors: u32,
    #[serde(default = "default_consensus")]
    pub consensus: u32,
    pub executors: u32,
    pub verifiers: u32,
    pub cluster_size: u32,
    /// Fraction of chunks each verifier checks.
    pub eta: f64,
    #[serde(default = "default_gas_tx")]
    pub gas_tx_limit: u64,
    #[serde(default = "default_gas_chunk")]
    pub gas_chunk_limit: u64,
    /// Message delay bound; delays are drawn from [delta_t/4, delta_t].
    #[serde(default = "default_delta")]
    pub delta_t: u64,
    /// Guarantors each collector probes while resolving a challenge.
    #[serde(default = "default_probe_count")]
    pub probe_count: u32,
    /// Payload blocks to produce.
    pub blocks: u64,
    #[serde(default = "default_collections_per_block")]
    pub collections_per_block: u32,
    /// Transactions per collection.
    #[serde(default = "default_collection_size")]
    pub collection_size: u32,
    /// Gas each generated transaction consumes.
    #[serde(default = "default_tx_gas")]
    pub tx_gas: u64,
    /// Time between block proposals. Defaults to 2 * delta_t.
    #[serde(default)]
    pub block_interval: Option<u64>,
    /// Wait a result must provably sit before sealing. Defaults to
    /// 2 * delta_t: one hop to the verifiers plus one hop back covers any
    /// challenge in flight.
    #[serde(default)]
    pub seal_wait: Option<u64>,
    /// Response window for journaled computation challenges. Defaults to
    /// 4 * delta_t.
    #[serde(default)]
    pub response_window: Option<u64>,
    /// Wait a probing collector observes before attesting. Defaults to
    /// delta_t.
    #[serde(default)]
    pub mca_wait: Option<u64>,
    /// Hash-chain iterations per time unit for waiting proofs.
    #[serde(default = "default_vdf_rate")]
    pub vdf_rate: u64,
    /// Hard stop: proposal rounds before the run counts as stalled.
    /// Defaults to blocks + 40.
    #[serde(default)]
    pub max_rounds: Option<u64>,
    #[serde(default = "default_stake")]
    pub stake_per_node: u64,
    #[serde(default = "default_small_fine")]
    pub small_fine: u64,
    /// Misbehavior slash; the minimum-stake equivalent. Defaults to the
    /// per-node stake.
    #[serde(default)]
    pub large_slash: Option<u64>,
    /// Marks the first N clusters (after random formation) as withholding:
    /// every member gets the withholding strategy.
    #[serde(default)]
    pub withholding_clusters: u32,
    #[serde(default)]
    pub adversaries: Vec<AdversaryAssignment>,
    #[serde(default)]
    pub expect: Expectations,
}

fn default_consensus() -> u32 {
    3
}
fn default_gas_tx() -> u64 {
    10
}
fn default_gas_chunk() -> u64 {
    80
}
fn default_delta() -> u64 {
    1000
}
fn default_probe_count() -> u32 {
    3
}
fn default_collections_per_block() -> u32 {
    3
}
fn default_collection_size() -> u32 {
    8
}
fn default_tx_gas() -> u64 {
    10
}
fn default_vdf_rate() -> u64 {
    1
}
fn default_stake() -> u64 {
    100
}
fn default_small_fine() -> u64 {
    1
}

impl ScenarioConfig {
    pub fn block_interval(&self) -> u64 {
        self.block_interval.unwrap_or(2 * self.delta_t)
    }
    pub fn seal_wait(&self) -> u64 {
        self.seal_wait.unwrap_or(2 * self.delta_t)
    }
    pub fn response_window(&self) -> u64 {
        self.response_window.unwrap_or(4 * self.delta_t)
    }
    pub fn mca_wait(&self) -> u64 {
        self.mca_wait.unwrap_or(self.delta_t)
    }
    pub fn max_rounds(&self) -> u64 {
        self.max_rounds.unwrap_or(self.blocks + 40)
    }
    pub fn large_slash(&self) -> u64 {
        self.large_slash.unwrap_or(self.stake_per_node)
    }
    pub fn cluster_count(&self) -> u32 {
        self.collectors.div_ceil(self.cluster_size)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.collectors == 0 {
            return Err(err("collectors", "must be at least 1"));
        }
        if self.consensus == 0 {
            return Err(err("consensus", "must be at least 1"));
        }
        if self.executors == 0 {
            return Err(err("executors", "must be at least 1"));
        }
        if self.verifiers == 0 {
            return Err(err("verifiers", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(err("eta", format!("{} is outside (0, 1]", self.eta)));
        }
        if self.delta_t == 0 {
            return Err(err("delta_t", "must be positive"));
        }
        if self.cluster_size == 0 || self.cluster_size > self.collectors {
            return Err(err(
                "cluster_size",
                format!("{} is outside 1..={}", self.cluster_size, self.collectors),
            ));
        }
        if self.gas_tx_limit == 0 || self.gas_chunk_limit < self.gas_tx_limit {
            return Err(err(
                "gas_chunk_limit",
                "chunk limit must be at least the transaction limit",
            ));
        }
        if self.tx_gas == 0 || self.tx_gas > self.gas_tx_limit {
            return Err(err(
                "tx_gas",
                format!("{} is outside 1..={}", self.tx_gas, self.gas_tx_limit),
            ));
        }
        if self.blocks == 0 {
            return Err(err("blocks", "must be at least 1"));
        }
        if self.collection_size == 0 {
            return Err(err("collection_size", "must be at least 1"));
        }
        if self.withholding_clusters > self.cluster_count() {
            return Err(err(
                "withholding_clusters",
                format!("only {} clusters exist", self.cluster_count()),
            ));
        }
        if self.vdf_rate == 0 {
            return Err(err("vdf_rate", "must be positive"));
        }
        for a in &self.adversaries {
            let count = match a.role {
                Role::Collector => self.collectors,
                Role::Consensus => self.consensus,
                Role::Execution => self.executors,
                Role::Verification => self.verifiers,
            };
            if a.index >= count {
                return Err(err(
                    "adversaries",
                    format!("{:?} index {} out of range (count {})", a.role, a.index, count),
                ));
            }
            if a.role == Role::Consensus {
                return Err(err(
                    "adversaries",
                    "consensus faults are out of scope; the committee is ideal",
                ));
            }
            let role_matches = matches!(
                (&a.strategy, a.role),
                (AdversaryStrategy::FaultyExecutor { .. }, Role::Execution)
                    | (AdversaryStrategy::WithholdingCluster, Role::Collector)
                    | (AdversaryStrategy::LazyVerifier, Role::Verification)
                    | (AdversaryStrategy::SpuriousChallenger, Role::Verification)
                    | (AdversaryStrategy::ColludingVerifier { .. }, Role::Verification)
            );
            if !role_matches {
                return Err(err(
                    "adversaries",
                    format!("strategy {:?} does not fit role {:?}", a.strategy, a.role),
                ));
            }
            if let AdversaryStrategy::ColludingVerifier { partner_executor } = a.strategy {
                if partner_executor >= self.executors {
                    return Err(err(
                        "adversaries",
                        format!("partner executor {partner_executor} out of range"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(json).map_err(|e| err("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            master_seed: 1,
            collectors: 12,
            consensus: 3,
            executors: 3,
            verifiers: 10,
            cluster_size: 4,
            eta: 0.5,
            gas_tx_limit: 10,
            gas_chunk_limit: 80,
            delta_t: 1000,
            probe_count: 3,
            blocks: 5,
            collections_per_block: 3,
            collection_size: 8,
            tx_gas: 10,
            block_interval: None,
            seal_wait: None,
            response_window: None,
            mca_wait: None,
            vdf_rate: 1,
            max_rounds: None,
            stake_per_node: 100,
            small_fine: 1,
            large_slash: None,
            withholding_clusters: 0,
            adversaries: vec![],
            expect: Expectations::default(),
        }
    }

    #[test]
    fn defaults_derive_from_delta() {
        let cfg = base();
        assert_eq!(cfg.block_interval(), 2000);
        assert_eq!(cfg.seal_wait(), 2000);
        assert_eq!(cfg.response_window(), 4000);
        assert_eq!(cfg.mca_wait(), 1000);
        assert_eq!(cfg.cluster_count(), 3);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut cfg = base();
        cfg.eta = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "eta");

        let mut cfg = base();
        cfg.cluster_size = 50;
        assert_eq!(cfg.validate().unwrap_err().field, "cluster_size");

        let mut cfg = base();
        cfg.adversaries.push(AdversaryAssignment {
            role: Role::Verification,
            index: 99,
            strategy: AdversaryStrategy::LazyVerifier,
        });
        assert_eq!(cfg.validate().unwrap_err().field, "adversaries");

        let mut cfg = base();
        cfg.adversaries.push(AdversaryAssignment {
            role: Role::Execution,
            index: 0,
            strategy: AdversaryStrategy::LazyVerifier,
        });
        assert_eq!(cfg.validate().unwrap_err().field, "adversaries");
    }

    #[test]
    fn json_round_trip_with_unknown_field_rejected() {
        let cfg = base();
        let json = serde_json::to_string(&cfg).unwrap();
        let parsed = ScenarioConfig::from_json(&json).unwrap();
        assert_eq!(parsed, cfg);
        assert!(ScenarioConfig::from_json("{\"bogus_field\": 1}").is_err());
    }
}
