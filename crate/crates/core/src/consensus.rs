//! Idealized consensus committee: block production with hash-chained
//! entropy, result and approval accumulation, the eight-condition seal
//! validity check, waiting proofs, challenge hosting, and the only write
//! path to the stake ledger.
//!
//! The committee is modeled as a single honest actor parameterized by the
//! supermajority assumption; consensus-internal faults are out of scope.
//! Everything time-dependent takes an explicit `now` so the simulator owns
//! the clock.

use crate::challenges::{
    adjudicate_fcc, mcc_cluster_slash, mcc_fines, mcc_tally, AdjudicationOutcome, MccTally,
    PenaltySchedule, ResponseOrTimeout, Verdict,
};
use crate::codec::Canonical;
use crate::crypto::{hash_bytes, hash_concat, sign, verify, HashValue, SecretKey};
use crate::exec::{GasSchedule, RegisterState, state_commitment};
use crate::messages::{
    Block, BlockSeal, ChallengeRecord, ExecutionReceipt, ExecutionResult,
    FaultyComputationChallenge, FaultyComputationResponse, GuaranteedCollection,
    MissingCollectionAttestation, MissingCollectionChallenge, NodeId, NodeSig, ResultApproval,
    Role, StakeUpdate, Transaction, WaitingProof,
};
use crate::stake::{Fraction, StakeLedger};
use crate::verifier::verify_selection_proof;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Builds a waiting proof spanning `duration` time units: an iterated hash
/// chain of `duration * rate` steps over the start mark.
pub fn waiting_proof_make(start_mark: HashValue, duration: u64, rate: u64) -> WaitingProof {
    let iterations = duration.saturating_mul(rate);
    let mut out = start_mark;
    for _ in 0..iterations {
        out = hash_bytes(&out.0);
    }
    WaitingProof {
        start_mark,
        iterations,
        output: out,
    }
}

/// Recomputes the hash chain. Valid iff the output matches, the proof is
/// bound to the expected start mark, and it spans at least
/// `required_duration * rate` iterations.
pub fn waiting_proof_verify(
    proof: &WaitingProof,
    expected_start: HashValue,
    required_duration: u64,
    rate: u64,
) -> bool {
    if proof.start_mark != expected_start {
        return false;
    }
    if proof.iterations < required_duration.saturating_mul(rate) {
        return false;
    }
    let mut out = proof.start_mark;
    for _ in 0..proof.iterations {
        out = hash_bytes(&out.0);
    }
    out == proof.output
}

/// Start mark for the attestation a collector signs after unanswered
/// probes, binding the waiting proof to (collection, attestor).
pub fn mca_start_mark(collection_hash: HashValue, attestor: &NodeId) -> HashValue {
    hash_concat(&[&collection_hash.0, b"mca-wait", &attestor.canonical_bytes()])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// Protocol-wide fraction of chunks each verifier checks.
    pub eta: f64,
    /// Time a result must wait before sealing, so any challenge provably
    /// had time to arrive (two message hops after the receipt broadcast).
    pub seal_wait: u64,
    /// Hash-chain iterations per simulated time unit.
    pub vdf_rate: u64,
    /// Response window for a journaled computation challenge.
    pub response_window: u64,
    /// Wait a probing collector observes before attesting.
    pub mca_wait: u64,
    pub penalties: PenaltySchedule,
    pub gas: GasSchedule,
}

/// Receipts grouped by identical (result, per-chunk proof keys): members
/// attest to the same result and the same trace secrets.
#[derive(Debug, Clone)]
pub struct ReceiptGroup {
    pub spock_pks: Vec<crate::crypto::PublicKey>,
    pub executor_sigs: Vec<NodeSig>,
    pub receipt_hashes: Vec<HashValue>,
}

/// One execution result accumulating receipts and approvals.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub result: ExecutionResult,
    pub height: u64,
    pub first_seen: u64,
    pub groups: Vec<ReceiptGroup>,
    pub approvals: Vec<ResultApproval>,
    pub skipped_collections: Vec<HashValue>,
}

/// A hosted computation challenge and where it stands.
#[derive(Debug, Clone)]
pub struct FccState {
    pub challenge: FaultyComputationChallenge,
    pub result_hash: HashValue,
    pub executor: NodeId,
    pub journaled_at: Option<u64>,
    pub window_end: Option<u64>,
    pub adjudicated: bool,
}

/// A hosted missing-collection challenge.
#[derive(Debug, Clone)]
pub struct MccState {
    pub challenge: MissingCollectionChallenge,
    pub guarantors: Vec<NodeId>,
    pub attestations: Vec<MissingCollectionAttestation>,
    pub resolved: bool,
    /// Fines applied (exactly once per challenge).
    pub concluded: bool,
    pub cluster_slashed: bool,
}

/// Per-condition verdicts of the seal validity check, numbered 1..=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealCheck {
    pub conditions: [bool; 8],
}

impl SealCheck {
    pub fn valid(&self) -> bool {
        self.conditions.iter().all(|&c| c)
    }

    pub fn failed_conditions(&self) -> Vec<u8> {
        self.conditions
            .iter()
            .enumerate()
            .filter_map(|(i, &ok)| (!ok).then_some(i as u8 + 1))
            .collect()
    }
}

/// Finalized chain plus everything the committee tracks between blocks.
pub struct ChainState {
    pub params: ConsensusParams,
    pub ledger: StakeLedger,
    committee: Vec<(NodeId, SecretKey)>,
    pub clusters: Vec<Vec<NodeId>>,
    pub blocks: Vec<Block>,
    block_heights: BTreeMap<HashValue, u64>,
    pub genesis_result: ExecutionResult,
    /// Accepted seal per height; genesis is sealed by axiom.
    pub seals: BTreeMap<u64, BlockSeal>,
    pub highest_sealed: u64,
    pub results: BTreeMap<HashValue, ResultRecord>,
    results_by_height: BTreeMap<u64, Vec<HashValue>>,
    orphan_approvals: BTreeMap<HashValue, Vec<ResultApproval>>,
    pub fccs: BTreeMap<HashValue, FccState>,
    fccs_by_result: BTreeMap<HashValue, Vec<HashValue>>,
    pub upheld_faulty: BTreeSet<HashValue>,
    pub mccs: BTreeMap<HashValue, MccState>,
    applied_outcomes: BTreeSet<(HashValue, u8)>,
    pending_collections: VecDeque<GuaranteedCollection>,
    pending_challenges: VecDeque<ChallengeRecord>,
    pending_updates: VecDeque<StakeUpdate>,
    pub outcomes: Vec<AdjudicationOutcome>,
}

impl ChainState {
    /// Creates the chain with its genesis block (sealed by axiom) and the
    /// initial stake table.
    pub fn new(
        params: ConsensusParams,
        ledger: StakeLedger,
        committee: Vec<(NodeId, SecretKey)>,
        clusters: Vec<Vec<NodeId>>,
        beacon_seed: HashValue,
    ) -> Self {
        let genesis = Block {
            height: 0,
            previous_hash: HashValue::ZERO,
            entropy: hash_concat(&[b"beacon", &beacon_seed.0]),
            collections: vec![],
            seals: vec![],
            challenges: vec![],
            state_updates: vec![],
            consensus_sigs: vec![],
        };
        let genesis_hash = genesis.hash();
        let genesis_result = ExecutionResult {
            block_hash: genesis_hash,
            previous_result_hash: HashValue::ZERO,
            chunks: vec![],
            final_state: state_commitment(&RegisterState::new()),
        };
        let genesis_seal = BlockSeal {
            block_hash: genesis_hash,
            result_hash: genesis_result.content_hash(),
            executor_sigs: vec![],
            attestation_sigs: vec![],
            waiting: waiting_proof_make(genesis_result.content_hash(), 0, params.vdf_rate),
        };
        let mut block_heights = BTreeMap::new();
        block_heights.insert(genesis_hash, 0);
        let mut seals = BTreeMap::new();
        seals.insert(0, genesis_seal);
        ChainState {
            params,
            ledger,
            committee,
            clusters,
            blocks: vec![genesis],
            block_heights,
            genesis_result,
            seals,
            highest_sealed: 0,
            results: BTreeMap::new(),
            results_by_height: BTreeMap::new(),
            orphan_approvals: BTreeMap::new(),
            fccs: BTreeMap::new(),
            fccs_by_result: BTreeMap::new(),
            upheld_faulty: BTreeSet::new(),
            mccs: BTreeMap::new(),
            applied_outcomes: BTreeSet::new(),
            pending_collections: VecDeque::new(),
            pending_challenges: VecDeque::new(),
            pending_updates: VecDeque::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn block_by_hash(&self, hash: &HashValue) -> Option<&Block> {
        self.block_heights
            .get(hash)
            .map(|&h| &self.blocks[h as usize])
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().unwrap()
    }

    /// Result currently sealed at `height`.
    pub fn sealed_result(&self, height: u64) -> Option<&ExecutionResult> {
        let seal = self.seals.get(&height)?;
        if height == 0 {
            return Some(&self.genesis_result);
        }
        self.results.get(&seal.result_hash).map(|r| &r.result)
    }

    /// Validates and queues a guaranteed collection: every signature must
    /// verify and the signers must hold strictly more than 2/3 of the
    /// cluster's stake.
    pub fn on_collection(&mut self, gc: GuaranteedCollection) -> bool {
        let Some(cluster) = self.clusters.get(gc.cluster_index as usize) else {
            return false;
        };
        for ns in &gc.guarantor_sigs {
            if !verify(&ns.node.public_key, &gc.collection_hash.0, &ns.sig) {
                return false;
            }
        }
        let signers: Vec<NodeId> = gc.guarantors().cloned().collect();
        let ok = self
            .ledger
            .fraction_over_population(&signers, cluster, Fraction::TWO_THIRDS, true)
            .unwrap_or(false);
        if ok {
            self.pending_collections.push_back(gc);
        }
        ok
    }

    /// Records a receipt, grouping it with consistent ones. Receipts that
    /// skip collections are accepted only when the tally justifies it.
    pub fn on_receipt(
        &mut self,
        receipt: &ExecutionReceipt,
        skipped: &[HashValue],
        now: u64,
    ) -> bool {
        if !receipt.verify_executor_sig() || receipt.executor_sig.node.role != Role::Execution {
            return false;
        }
        if receipt.spocks.len() != receipt.result.chunk_count() {
            return false;
        }
        let Some(&height) = self.block_heights.get(&receipt.result.block_hash) else {
            return false;
        };
        for hash in skipped {
            let justified = self
                .mccs
                .get(hash)
                .map(|m| {
                    !m.resolved
                        && mcc_tally(&m.attestations, &m.guarantors, &self.ledger, m.resolved)
                            == MccTally::Skippable
                })
                .unwrap_or(false);
            if !justified {
                return false;
            }
        }

        let result_hash = receipt.result.content_hash();
        let receipt_hash = receipt.content_hash();
        let pks: Vec<crate::crypto::PublicKey> = receipt.spocks.iter().map(|z| z.pk).collect();
        let record = self.results.entry(result_hash).or_insert_with(|| ResultRecord {
            result: receipt.result.clone(),
            height,
            first_seen: now,
            groups: vec![],
            approvals: vec![],
            skipped_collections: skipped.to_vec(),
        });
        if let Some(group) = record.groups.iter_mut().find(|g| g.spock_pks == pks) {
            if !group.receipt_hashes.contains(&receipt_hash) {
                group.executor_sigs.push(receipt.executor_sig.clone());
                group.receipt_hashes.push(receipt_hash);
            }
        } else {
            record.groups.push(ReceiptGroup {
                spock_pks: pks,
                executor_sigs: vec![receipt.executor_sig.clone()],
                receipt_hashes: vec![receipt_hash],
            });
        }
        let by_height = self.results_by_height.entry(height).or_default();
        if !by_height.contains(&result_hash) {
            by_height.push(result_hash);
        }
        if let Some(orphans) = self.orphan_approvals.remove(&result_hash) {
            for a in orphans {
                self.store_approval(result_hash, a);
            }
        }
        true
    }

    pub fn on_approval(&mut self, approval: ResultApproval) {
        let result_hash = approval.attestation.result_hash;
        if self.results.contains_key(&result_hash) {
            self.store_approval(result_hash, approval);
        } else {
            self.orphan_approvals
                .entry(result_hash)
                .or_default()
                .push(approval);
        }
    }

    fn store_approval(&mut self, result_hash: HashValue, approval: ResultApproval) {
        let record = self.results.get_mut(&result_hash).unwrap();
        let addr = approval.verifier_sig.node.addr();
        if record
            .approvals
            .iter()
            .any(|a| a.verifier_sig.node.addr() == addr)
        {
            return; // one approval per verifier per result
        }
        record.approvals.push(approval);
    }

    /// Full validation of one approval against a receipt group: verifier
    /// known and staked, signatures valid, selection proof recomputes, and
    /// every trace-secret proof identity-bound and consistent with the
    /// executor's.
    pub fn validate_approval(
        &self,
        record: &ResultRecord,
        group: &ReceiptGroup,
        approval: &ResultApproval,
    ) -> bool {
        let verifier = &approval.verifier_sig.node;
        if verifier.role != Role::Verification || !self.ledger.contains(verifier) {
            return false;
        }
        if !approval.verify_verifier_sig() {
            return false;
        }
        let result_hash = record.result.content_hash();
        if approval.attestation.result_hash != result_hash {
            return false;
        }
        if !verify(
            &verifier.public_key,
            &result_hash.0,
            &approval.attestation.sig,
        ) {
            return false;
        }
        if approval.proof.spocks.len() != approval.proof.indices.len() {
            return false;
        }
        if !verify_selection_proof(
            &record.result.canonical_bytes(),
            record.result.chunk_count(),
            &verifier.public_key,
            &approval.proof.selection_sig,
            &approval.proof.indices,
            self.params.eta,
        ) {
            return false;
        }
        for (j, &chunk_index) in approval.proof.indices.iter().enumerate() {
            let Some(executor_pk) = group.spock_pks.get(chunk_index as usize) else {
                return false;
            };
            let z = &approval.proof.spocks[j];
            if !crate::spock::spock_verify(z, verifier) || z.pk != *executor_pk {
                return false;
            }
        }
        true
    }

    fn validated_approvals<'a>(
        &'a self,
        record: &'a ResultRecord,
        group: &'a ReceiptGroup,
    ) -> Vec<&'a ResultApproval> {
        record
            .approvals
            .iter()
            .filter(|a| self.validate_approval(record, group, a))
            .collect()
    }

    /// Evaluates the eight seal validity conditions for a candidate seal.
    pub fn seal_validity(&self, candidate: &BlockSeal, now: u64) -> SealCheck {
        let previous = self.seals.get(&self.highest_sealed).unwrap();
        let mut conditions = [false; 8];

        let record = self.results.get(&candidate.result_hash);
        let candidate_result = record.map(|r| &r.result);

        // (1) the candidate's result chains to the sealed result
        conditions[0] = candidate_result
            .map(|r| r.previous_result_hash == previous.result_hash)
            .unwrap_or(false);

        // (2) the candidate's block is the sealed block's child
        conditions[1] = self
            .block_by_hash(&candidate.block_hash)
            .map(|b| b.previous_hash == previous.block_hash)
            .unwrap_or(false);

        // (3) the candidate's start state is the sealed result's final state
        let previous_final = if self.highest_sealed == 0 {
            Some(self.genesis_result.final_state)
        } else {
            self.results
                .get(&previous.result_hash)
                .map(|r| r.result.final_state)
        };
        conditions[2] = match (candidate_result, previous_final) {
            (Some(r), Some(f)) => r.start_state() == f,
            _ => false,
        };

        // (4, 5) attestations: strictly more than 2/3 of verifier stake,
        // every contributing approval fully validated
        if let Some(record) = record {
            let group = record.groups.iter().find(|g| {
                candidate
                    .executor_sigs
                    .iter()
                    .all(|s| g.executor_sigs.iter().any(|gs| gs == s))
            });
            if let Some(group) = group {
                let valid = self.validated_approvals(record, group);
                let mut all_contributors_valid = !candidate.attestation_sigs.is_empty();
                let mut signers: Vec<NodeId> = Vec::new();
                for ns in &candidate.attestation_sigs {
                    match valid
                        .iter()
                        .find(|a| a.verifier_sig.node == ns.node && a.attestation.sig == ns.sig)
                    {
                        Some(_) => signers.push(ns.node.clone()),
                        None => all_contributors_valid = false,
                    }
                }
                conditions[4] = all_contributors_valid && !candidate.executor_sigs.is_empty();
                conditions[3] = self
                    .ledger
                    .fraction_of_role(&signers, Role::Verification, Fraction::TWO_THIRDS, true)
                    .unwrap_or(false);
            }
        }

        // (6) no pending challenge against the result
        conditions[5] = !self.has_pending_fcc(&candidate.result_hash, now);

        // (7) no upheld challenge against the result
        conditions[6] = !self.upheld_faulty.contains(&candidate.result_hash);

        // (8) the waiting proof spans the required wait from the result mark
        conditions[7] = waiting_proof_verify(
            &candidate.waiting,
            candidate.result_hash,
            self.params.seal_wait,
            self.params.vdf_rate,
        );

        SealCheck { conditions }
    }

    fn has_pending_fcc(&self, result_hash: &HashValue, now: u64) -> bool {
        self.fccs_by_result
            .get(result_hash)
            .map(|hashes| {
                hashes.iter().any(|h| {
                    let fcc = &self.fccs[h];
                    !fcc.adjudicated
                        && fcc
                            .journaled_at
                            .map(|_| fcc.window_end.map(|w| now < w).unwrap_or(true))
                            .unwrap_or(true)
                })
            })
            .unwrap_or(false)
    }

    /// Registers an incoming computation challenge for journaling. The
    /// assignment proof must validate; unprovable challenges are dropped.
    pub fn on_fcc(&mut self, fcc: FaultyComputationChallenge) -> bool {
        let challenge_hash = fcc.content_hash();
        if self.fccs.contains_key(&challenge_hash) {
            return false;
        }
        if !fcc.verify_sig() || fcc.verifier_sig.node.role != Role::Verification {
            return false;
        }
        // Map the challenged receipt to its result and its publisher.
        let Some((result_hash, executor)) = self.results.iter().find_map(|(rh, rec)| {
            rec.groups.iter().find_map(|g| {
                g.receipt_hashes
                    .iter()
                    .position(|h| *h == fcc.receipt_hash)
                    .map(|pos| (*rh, g.executor_sigs[pos].node.clone()))
            })
        }) else {
            return false;
        };
        let record = &self.results[&result_hash];
        if fcc.chunk_index as usize >= record.result.chunk_count() {
            return false;
        }
        if !verify_selection_proof(
            &record.result.canonical_bytes(),
            record.result.chunk_count(),
            &fcc.verifier_sig.node.public_key,
            &fcc.assignment_sig,
            &fcc.assignment_indices,
            self.params.eta,
        ) || !fcc.assignment_indices.contains(&fcc.chunk_index)
        {
            return false;
        }
        self.fccs.insert(
            challenge_hash,
            FccState {
                challenge: fcc.clone(),
                result_hash,
                executor,
                journaled_at: None,
                window_end: None,
                adjudicated: false,
            },
        );
        self.fccs_by_result
            .entry(result_hash)
            .or_default()
            .push(challenge_hash);
        self.pending_challenges
            .push_back(ChallengeRecord::FaultyComputation(fcc));
        true
    }

    /// Adjudicates a response to a hosted challenge and applies the
    /// outcome. `resolve_tx` and `resolve_state` supply the disputed
    /// transaction text and the agreed input state.
    pub fn on_fcc_response(
        &mut self,
        response: &FaultyComputationResponse,
        resolve_tx: &dyn Fn(usize) -> Option<Transaction>,
        resolve_state: &dyn Fn(crate::messages::StateCommitment) -> Option<RegisterState>,
        height: u64,
    ) -> Option<AdjudicationOutcome> {
        let state = self.fccs.get(&response.challenge_hash)?;
        if state.adjudicated {
            return None;
        }
        if response.executor_sig.node != state.executor {
            return None;
        }
        let msg = FaultyComputationResponse::signing_bytes(
            &response.challenge_hash,
            &response.state_commitments,
        );
        if !verify(
            &response.executor_sig.node.public_key,
            &msg,
            &response.executor_sig.sig,
        ) {
            return None;
        }
        let outcome = adjudicate_fcc(
            &state.challenge,
            &state.executor,
            &state.challenge.verifier_sig.node.clone(),
            ResponseOrTimeout::Response(response.clone()),
            resolve_tx,
            resolve_state,
            &self.params.gas,
            &self.params.penalties,
        );
        self.conclude_fcc(response.challenge_hash, outcome.clone(), height);
        Some(outcome)
    }

    /// Times out every journaled, unanswered challenge whose window has
    /// elapsed, slashing the executor with a waiting proof attached.
    pub fn expire_fcc_windows(&mut self, now: u64, height: u64) -> Vec<AdjudicationOutcome> {
        let expired: Vec<HashValue> = self
            .fccs
            .iter()
            .filter(|(_, s)| {
                !s.adjudicated && s.window_end.map(|w| now >= w).unwrap_or(false)
            })
            .map(|(h, _)| *h)
            .collect();
        let mut outcomes = Vec::new();
        for challenge_hash in expired {
            let state = &self.fccs[&challenge_hash];
            let mut outcome = adjudicate_fcc(
                &state.challenge,
                &state.executor,
                &state.challenge.verifier_sig.node.clone(),
                ResponseOrTimeout::Timeout,
                &|_| None,
                &|_| None,
                &self.params.gas,
                &self.params.penalties,
            );
            outcome.waiting = Some(waiting_proof_make(
                challenge_hash,
                self.params.response_window,
                self.params.vdf_rate,
            ));
            self.conclude_fcc(challenge_hash, outcome.clone(), height);
            outcomes.push(outcome);
        }
        outcomes
    }

    fn conclude_fcc(&mut self, challenge_hash: HashValue, outcome: AdjudicationOutcome, height: u64) {
        let result_hash = self.fccs[&challenge_hash].result_hash;
        if matches!(outcome.verdict, Verdict::ExecutorSlashed | Verdict::BothSlashed) {
            self.upheld_faulty.insert(result_hash);
        }
        self.fccs.get_mut(&challenge_hash).unwrap().adjudicated = true;
        let _ = self.apply_slashing(&outcome, height);
    }

    /// Registers a missing-collection challenge against the guarantors of
    /// the referenced collection.
    pub fn on_mcc(&mut self, mcc: MissingCollectionChallenge) -> bool {
        if mcc.challenger_sig.node.role != Role::Execution {
            return false;
        }
        let msg = MissingCollectionChallenge::signing_bytes(&mcc.block_hash, &mcc.collection_hash);
        if !verify(&mcc.challenger_sig.node.public_key, &msg, &mcc.challenger_sig.sig) {
            return false;
        }
        if self.mccs.contains_key(&mcc.collection_hash) {
            return true; // already hosted; one tally per collection
        }
        let Some(block) = self.block_by_hash(&mcc.block_hash) else {
            return false;
        };
        let Some(gc) = block
            .collections
            .iter()
            .find(|c| c.collection_hash == mcc.collection_hash)
        else {
            return false;
        };
        let guarantors: Vec<NodeId> = gc.guarantors().cloned().collect();
        self.mccs.insert(
            mcc.collection_hash,
            MccState {
                challenge: mcc.clone(),
                guarantors,
                attestations: vec![],
                resolved: false,
                concluded: false,
                cluster_slashed: false,
            },
        );
        self.pending_challenges
            .push_back(ChallengeRecord::MissingCollection(mcc));
        true
    }

    /// Records a missing-collection attestation if its signature and
    /// waiting proof hold.
    pub fn on_mca(&mut self, mca: MissingCollectionAttestation, height: u64) {
        let expected_mark = mca_start_mark(mca.collection_hash, &mca.attestor);
        if !mca.verify_sig()
            || !waiting_proof_verify(
                &mca.waiting,
                expected_mark,
                self.params.mca_wait,
                self.params.vdf_rate,
            )
            || mca.attestor.role != Role::Collector
        {
            return;
        }
        let Some(state) = self.mccs.get_mut(&mca.collection_hash) else {
            return;
        };
        state.attestations.push(mca);
        self.conclude_mcc_if_ready(height);
    }

    /// Marks a challenged collection as resolved (its text surfaced).
    pub fn on_collection_resolved(&mut self, collection_hash: HashValue, height: u64) {
        if let Some(state) = self.mccs.get_mut(&collection_hash) {
            state.resolved = true;
        }
        self.conclude_mcc_if_ready(height);
    }

    /// Applies the per-challenge uniform fines once a tally concludes
    /// either way.
    fn conclude_mcc_if_ready(&mut self, height: u64) {
        let execution_nodes = self.ledger.nodes_of_role(Role::Execution);
        let hashes: Vec<HashValue> = self.mccs.keys().copied().collect();
        for hash in hashes {
            let state = &self.mccs[&hash];
            if state.concluded {
                continue;
            }
            let tally = mcc_tally(
                &state.attestations,
                &state.guarantors,
                &self.ledger,
                state.resolved,
            );
            if tally == MccTally::Pending {
                continue;
            }
            let outcome = AdjudicationOutcome {
                challenge_hash: state.challenge.content_hash(),
                verdict: if tally == MccTally::Resolved {
                    Verdict::CollectionResolved
                } else {
                    Verdict::FinesApplied
                },
                penalties: mcc_fines(
                    &execution_nodes,
                    &state.guarantors,
                    &self.params.penalties,
                ),
                evidence: None,
                waiting: None,
            };
            self.mccs.get_mut(&hash).unwrap().concluded = true;
            let _ = self.apply_slashing(&outcome, height);
        }
    }

    /// Current tally for a hosted missing-collection challenge.
    pub fn mcc_tally_state(&self, collection_hash: &HashValue) -> Option<MccTally> {
        self.mccs.get(collection_hash).map(|m| {
            mcc_tally(&m.attestations, &m.guarantors, &self.ledger, m.resolved)
        })
    }

    /// Applies an adjudication outcome to the ledger and journals the
    /// updates into the next block. Rejects double application.
    pub fn apply_slashing(
        &mut self,
        outcome: &AdjudicationOutcome,
        height: u64,
    ) -> Result<(), &'static str> {
        let key = (outcome.challenge_hash, verdict_tag(outcome.verdict));
        if !self.applied_outcomes.insert(key) {
            return Err("outcome already applied");
        }
        for p in &outcome.penalties {
            let applied = self
                .ledger
                .apply_delta(&p.node, -(p.amount as i64), p.reason, height)
                .unwrap_or(0);
            self.pending_updates.push_back(StakeUpdate {
                node: p.node.clone(),
                delta: applied,
                reason: p.reason,
                challenge_ref: Some(outcome.challenge_hash),
            });
        }
        self.outcomes.push(outcome.clone());
        Ok(())
    }

    /// Builds, signs, and appends the next block: queued collections in
    /// FIFO order, every currently valid seal, journaled challenges, and
    /// stake updates. Entropy chains from the parent.
    pub fn propose_block(&mut self, now: u64) -> Block {
        let parent = self.head().clone();
        let height = parent.height + 1;
        let entropy = hash_concat(&[&parent.entropy.0, &height.to_be_bytes()]);

        let seals = self.collect_valid_seals(now, height);
        let collections: Vec<GuaranteedCollection> = self.pending_collections.drain(..).collect();
        let challenges: Vec<ChallengeRecord> = self.pending_challenges.drain(..).collect();
        let state_updates: Vec<StakeUpdate> = self.pending_updates.drain(..).collect();

        let mut block = Block {
            height,
            previous_hash: parent.hash(),
            entropy,
            collections,
            seals,
            challenges,
            state_updates,
            consensus_sigs: vec![],
        };
        let msg = block.signing_bytes();
        block.consensus_sigs = self
            .committee
            .iter()
            .map(|(node, sk)| NodeSig {
                node: node.clone(),
                sig: sign(sk, &msg),
            })
            .collect();

        // Journaled challenges open their response window at proposal.
        for record in &block.challenges {
            if let ChallengeRecord::FaultyComputation(fcc) = record {
                if let Some(state) = self.fccs.get_mut(&fcc.content_hash()) {
                    state.journaled_at = Some(now);
                    state.window_end = Some(now + self.params.response_window);
                }
            }
        }

        self.block_heights.insert(block.hash(), height);
        self.blocks.push(block.clone());
        block
    }

    /// Walks heights upward from the highest sealed block, accepting the
    /// best valid candidate seal at each height until one is missing.
    fn collect_valid_seals(&mut self, now: u64, proposal_height: u64) -> Vec<BlockSeal> {
        let mut accepted = Vec::new();
        loop {
            let next_height = self.highest_sealed + 1;
            if next_height >= self.blocks.len() as u64 {
                break;
            }
            let Some(candidates) = self.results_by_height.get(&next_height).cloned() else {
                break;
            };
            let mut best: Option<(u128, HashValue, BlockSeal)> = None;
            for result_hash in candidates {
                if let Some((stake, seal)) = self.build_candidate_seal(&result_hash, now) {
                    let check = self.seal_validity(&seal, now);
                    if check.valid() {
                        let better = match &best {
                            None => true,
                            Some((best_stake, best_hash, _)) => {
                                stake > *best_stake
                                    || (stake == *best_stake && result_hash < *best_hash)
                            }
                        };
                        if better {
                            best = Some((stake, result_hash, seal));
                        }
                    }
                }
            }
            match best {
                Some((_, result_hash, seal)) => {
                    self.seals.insert(next_height, seal.clone());
                    self.highest_sealed = next_height;
                    // Sealing a receipt that skipped collections triggers
                    // the large slash on the whole guarantor set.
                    let skipped = self.results[&result_hash].skipped_collections.clone();
                    for collection_hash in skipped {
                        self.slash_cluster(collection_hash, proposal_height);
                    }
                    accepted.push(seal);
                }
                None => break,
            }
        }
        accepted
    }

    fn slash_cluster(&mut self, collection_hash: HashValue, height: u64) {
        let Some(state) = self.mccs.get(&collection_hash) else {
            return;
        };
        if state.cluster_slashed {
            return;
        }
        let outcome = AdjudicationOutcome {
            challenge_hash: state.challenge.content_hash(),
            verdict: Verdict::ClusterSlashed,
            penalties: mcc_cluster_slash(&state.guarantors, &self.params.penalties),
            evidence: None,
            waiting: None,
        };
        self.mccs.get_mut(&collection_hash).unwrap().cluster_slashed = true;
        let _ = self.apply_slashing(&outcome, height);
    }

    /// Assembles the strongest candidate seal for a result: the receipt
    /// group with the most validated approval stake behind it.
    pub fn build_candidate_seal(
        &self,
        result_hash: &HashValue,
        now: u64,
    ) -> Option<(u128, BlockSeal)> {
        let record = self.results.get(result_hash)?;
        if now.saturating_sub(record.first_seen) < self.params.seal_wait {
            return None;
        }
        let mut best: Option<(u128, BlockSeal)> = None;
        for group in &record.groups {
            let valid = self.validated_approvals(record, group);
            let stake: u128 = valid
                .iter()
                .map(|a| self.ledger.stake_of(&a.verifier_sig.node).unwrap_or(0) as u128)
                .sum();
            let seal = BlockSeal {
                block_hash: record.result.block_hash,
                result_hash: *result_hash,
                executor_sigs: group.executor_sigs.clone(),
                attestation_sigs: valid
                    .iter()
                    .map(|a| NodeSig {
                        node: a.verifier_sig.node.clone(),
                        sig: a.attestation.sig,
                    })
                    .collect(),
                waiting: waiting_proof_make(
                    *result_hash,
                    self.params.seal_wait,
                    self.params.vdf_rate,
                ),
            };
            if best.as_ref().map(|(s, _)| stake > *s).unwrap_or(true) {
                best = Some((stake, seal));
            }
        }
        best
    }
}

fn verdict_tag(v: Verdict) -> u8 {
    match v {
        Verdict::ExecutorSlashed => 0,
        Verdict::ChallengerSlashed => 1,
        Verdict::BothSlashed => 2,
        Verdict::CollectionResolved => 3,
        Verdict::ClusterSlashed => 4,
        Verdict::FinesApplied => 5,
    }
}

/// Rebuilds and checks the chain links: consecutive heights, parent hash
/// references, and a strict 2/3 consensus stake behind every non-genesis
/// block.
pub fn verify_chain(blocks: &[Block], ledger: &StakeLedger) -> bool {
    for (i, block) in blocks.iter().enumerate() {
        if block.height != i as u64 {
            return false;
        }
        if i == 0 {
            continue;
        }
        if block.previous_hash != blocks[i - 1].hash() {
            return false;
        }
        let msg = block.signing_bytes();
        let mut signers = Vec::new();
        for ns in &block.consensus_sigs {
            if !verify(&ns.node.public_key, &msg, &ns.sig) {
                return false;
            }
            signers.push(ns.node.clone());
        }
        match ledger.fraction_of_role(&signers, Role::Consensus, Fraction::TWO_THIRDS, true) {
            Ok(true) => {}
            _ => return false,
        }
    }
    true
}
