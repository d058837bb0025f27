//! Per-node, per-role stake accounting and threshold checks.
//!
//! Thresholds compare exact rationals in integer arithmetic. The strict
//! ">2/3" boundaries in seal and collection checks are bit-exact: two of
//! three equally staked nodes do not clear a strict two-thirds bar.

use crate::messages::{NodeId, Role, SlashReason};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("node {0:?} is not in the stake ledger")]
    UnknownNode((Role, u32)),
}

/// Exact rational threshold, e.g. 2/3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const TWO_THIRDS: Fraction = Fraction { num: 2, den: 3 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "denominator must be positive");
        Fraction { num, den }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeEvent {
    pub node: NodeId,
    pub delta: i64,
    pub reason: SlashReason,
    pub height: u64,
}

/// Stake table plus the journal of every change ever applied to it.
/// Mutation goes through [`StakeLedger::apply_delta`] only, and every call
/// appends exactly one journal entry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StakeLedger {
    entries: BTreeMap<(Role, u32), (NodeId, u64)>,
    journal: Vec<StakeEvent>,
}

impl StakeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node's initial stake as a genesis staking event.
    pub fn register(&mut self, node: NodeId, stake: u64) {
        self.entries.insert(node.addr(), (node.clone(), stake));
        self.journal.push(StakeEvent {
            node,
            delta: stake as i64,
            reason: SlashReason::GenesisStake,
            height: 0,
        });
    }

    pub fn stake_of(&self, node: &NodeId) -> Result<u64, LedgerError> {
        self.entries
            .get(&node.addr())
            .map(|(_, s)| *s)
            .ok_or(LedgerError::UnknownNode(node.addr()))
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.entries.contains_key(&node.addr())
    }

    /// Applies a stake change, clamping at zero, and journals it. Returns
    /// the actual (possibly clamped) delta.
    pub fn apply_delta(
        &mut self,
        node: &NodeId,
        delta: i64,
        reason: SlashReason,
        height: u64,
    ) -> Result<i64, LedgerError> {
        let entry = self
            .entries
            .get_mut(&node.addr())
            .ok_or(LedgerError::UnknownNode(node.addr()))?;
        let current = entry.1 as i64;
        let next = (current + delta).max(0);
        let applied = next - current;
        entry.1 = next as u64;
        self.journal.push(StakeEvent {
            node: node.clone(),
            delta: applied,
            reason,
            height,
        });
        Ok(applied)
    }

    pub fn total_stake_of_role(&self, role: Role) -> u64 {
        self.entries
            .iter()
            .filter(|((r, _), _)| *r == role)
            .map(|(_, (_, s))| *s)
            .sum()
    }

    pub fn nodes_of_role(&self, role: Role) -> Vec<NodeId> {
        self.entries
            .iter()
            .filter(|((r, _), _)| *r == role)
            .map(|(_, (n, _))| n.clone())
            .collect()
    }

    pub fn journal(&self) -> &[StakeEvent] {
        &self.journal
    }

    /// Stake-fraction check against an explicit population (for example one
    /// collector cluster). `strict` selects `>` over `>=`.
    pub fn fraction_over_population(
        &self,
        signers: &[NodeId],
        population: &[NodeId],
        threshold: Fraction,
        strict: bool,
    ) -> Result<bool, LedgerError> {
        let mut signer_stake: u128 = 0;
        for s in signers {
            if !population.iter().any(|p| p == s) {
                return Err(LedgerError::UnknownNode(s.addr()));
            }
            signer_stake += self.stake_of(s)? as u128;
        }
        let mut total: u128 = 0;
        for p in population {
            total += self.stake_of(p)? as u128;
        }
        let lhs = signer_stake * threshold.den as u128;
        let rhs = total * threshold.num as u128;
        Ok(if strict { lhs > rhs } else { lhs >= rhs })
    }

    /// Stake-fraction check over every node of `role`. Every signer must
    /// hold the role and be known to the ledger.
    pub fn fraction_of_role(
        &self,
        signers: &[NodeId],
        role: Role,
        threshold: Fraction,
        strict: bool,
    ) -> Result<bool, LedgerError> {
        let mut signer_stake: u128 = 0;
        let mut seen = std::collections::BTreeSet::new();
        for s in signers {
            if s.role != role || !self.contains(s) {
                return Err(LedgerError::UnknownNode(s.addr()));
            }
            if seen.insert(s.addr()) {
                signer_stake += self.stake_of(s)? as u128;
            }
        }
        let total = self.total_stake_of_role(role) as u128;
        let lhs = signer_stake * threshold.den as u128;
        let rhs = total * threshold.num as u128;
        Ok(if strict { lhs > rhs } else { lhs >= rhs })
    }
}

/// True iff the signers' stake meets `threshold` of the role's total.
/// Strict mode implements "more than" thresholds.
pub fn stake_fraction_met(
    signers: &[NodeId],
    role: Role,
    threshold: Fraction,
    strict: bool,
    ledger: &StakeLedger,
) -> Result<bool, LedgerError> {
    ledger.fraction_of_role(signers, role, threshold, strict)
}
