//! Construction and pure protocol steps for the two challenge types:
//! disputing a chunk's computation result, and reporting a withheld
//! collection. The consensus module applies the outcomes to the ledger;
//! the simulator owns all sequencing.

use crate::codec::Canonical;
use crate::crypto::{hash_bytes, sign, HashValue, SecretKey};
use crate::exec::{execute_transaction, state_commitment, GasSchedule, RegisterState};
use crate::messages::{
    ExecutionReceipt, FaultyComputationChallenge, FaultyComputationResponse,
    MissingCollectionAttestation, NodeId, NodeSig, SlashReason, Transaction,
};
use crate::stake::{Fraction, StakeLedger};
use crate::verifier::ChunkAssignment;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChallengeError {
    #[error("chunk {0} is not in the verifier's provable assignment")]
    ChunkNotAssigned(u32),
    #[error("challenged chunk index {index} out of range ({chunks} chunks)")]
    ChunkOutOfRange { index: u32, chunks: usize },
}

/// Verdict of an adjudicated challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The executor's published commitment was wrong (or it never
    /// responded); the executor is slashed.
    ExecutorSlashed,
    /// The challenger disputed a correct result (or filed a malformed
    /// challenge); the challenger is slashed.
    ChallengerSlashed,
    /// Both parties' commitments disagreed with the recomputation.
    BothSlashed,
    /// A challenged collection's text surfaced; execution proceeds.
    CollectionResolved,
    /// Enough attestations accumulated that receipts may skip the
    /// collection; sealing such a receipt slashes the whole guarantor set.
    ClusterSlashed,
    /// The per-challenge uniform fines (every execution node and every
    /// challenged guarantor pays, even on resolution).
    FinesApplied,
}

/// One stake penalty an outcome asks the consensus committee to apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Penalty {
    pub node: NodeId,
    pub amount: u64,
    pub reason: SlashReason,
}

/// Adjudication outcome: the verdict, the penalties it implies, and the
/// evidence trail. Always references the triggering challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationOutcome {
    pub challenge_hash: HashValue,
    pub verdict: Verdict,
    pub penalties: Vec<Penalty>,
    /// Recomputed commitment and the mismatch position, where applicable.
    pub evidence: Option<AdjudicationEvidence>,
    /// Waiting proof attached to timeout verdicts.
    pub waiting: Option<crate::messages::WaitingProof>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationEvidence {
    pub recomputed: crate::messages::StateCommitment,
    pub mismatch_index: u32,
}

/// Builds a well-formed challenge for a chunk the verifier recomputed and
/// disagrees with. The interim sequence runs from the chunk's published
/// start state through the verifier's end state. Refuses chunks outside
/// the verifier's provable assignment.
pub fn make_fcc(
    node: &NodeId,
    secret: &SecretKey,
    receipt: &ExecutionReceipt,
    assignment: &ChunkAssignment,
    chunk_index: u32,
    verifier_interims: Vec<crate::messages::StateCommitment>,
) -> Result<FaultyComputationChallenge, ChallengeError> {
    if !assignment.indices.contains(&chunk_index) {
        return Err(ChallengeError::ChunkNotAssigned(chunk_index));
    }
    if chunk_index as usize >= receipt.result.chunk_count() {
        return Err(ChallengeError::ChunkOutOfRange {
            index: chunk_index,
            chunks: receipt.result.chunk_count(),
        });
    }
    let receipt_hash = receipt.content_hash();
    let msg = FaultyComputationChallenge::signing_bytes(
        &receipt_hash,
        chunk_index,
        &assignment.indices,
        &assignment.selection_sig,
        &verifier_interims,
    );
    Ok(FaultyComputationChallenge {
        receipt_hash,
        chunk_index,
        assignment_indices: assignment.indices.clone(),
        assignment_sig: assignment.selection_sig,
        state_commitments: verifier_interims,
        verifier_sig: NodeSig {
            node: node.clone(),
            sig: sign(secret, &msg),
        },
    })
}

/// Smallest index where the two commitment sequences differ, or `None` if
/// they are identical. Callers guarantee equal lengths.
pub fn first_mismatch(
    a: &[crate::messages::StateCommitment],
    b: &[crate::messages::StateCommitment],
) -> Option<usize> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).position(|(x, y)| x != y)
}

/// The executor's side of an adjudication: either its response or proof
/// that the response window elapsed.
#[derive(Debug, Clone)]
pub enum ResponseOrTimeout {
    Response(FaultyComputationResponse),
    /// Window elapsed with no response; the caller supplies its waiting
    /// proof for the journal.
    Timeout,
}

/// Penalty magnitudes used by adjudication. The ordering is what matters:
/// the per-challenge fine must not eject a node, the misbehavior slash is
/// the full minimum stake.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub small_fine: u64,
    pub large_slash: u64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule {
            small_fine: 1,
            large_slash: 100,
        }
    }
}

/// Adjudicates a faulty-computation challenge.
///
/// With a response present, the committee finds the first commitment
/// mismatch at position `m >= 1` (position 0 is the chunk start state both
/// parties published, so a mismatch there marks the challenge malformed),
/// recomputes the disputed transaction from the agreed input state, and
/// slashes whichever party's commitment at `m` disagrees with the
/// recomputation. A timeout slashes the executor outright.
///
/// `resolve_tx` maps the chunk-local index of the disputed transaction to
/// its text; `resolve_state` supplies the full agreed input state, which
/// is hash-checked against both parties' commitment before use.
#[allow(clippy::too_many_arguments)]
pub fn adjudicate_fcc(
    challenge: &FaultyComputationChallenge,
    executor: &NodeId,
    challenger: &NodeId,
    response: ResponseOrTimeout,
    resolve_tx: &dyn Fn(usize) -> Option<Transaction>,
    resolve_state: &dyn Fn(crate::messages::StateCommitment) -> Option<RegisterState>,
    schedule: &GasSchedule,
    penalties: &PenaltySchedule,
) -> AdjudicationOutcome {
    let challenge_hash = challenge.content_hash();
    let slash = |node: &NodeId, reason: SlashReason| Penalty {
        node: node.clone(),
        amount: penalties.large_slash,
        reason,
    };

    let response = match response {
        ResponseOrTimeout::Timeout => {
            return AdjudicationOutcome {
                challenge_hash,
                verdict: Verdict::ExecutorSlashed,
                penalties: vec![slash(executor, SlashReason::ChallengeTimeout)],
                evidence: None,
                waiting: None,
            };
        }
        ResponseOrTimeout::Response(r) => r,
    };

    // A malformed response (wrong length) is a protocol violation by the
    // responder.
    if response.state_commitments.len() != challenge.state_commitments.len() {
        return AdjudicationOutcome {
            challenge_hash,
            verdict: Verdict::ExecutorSlashed,
            penalties: vec![slash(executor, SlashReason::MalformedResponse)],
            evidence: None,
            waiting: None,
        };
    }

    let mismatch = first_mismatch(&challenge.state_commitments, &response.state_commitments);
    let m = match mismatch {
        // Identical sequences: the challenger disputed nothing.
        None => {
            return AdjudicationOutcome {
                challenge_hash,
                verdict: Verdict::ChallengerSlashed,
                penalties: vec![slash(challenger, SlashReason::MalformedChallenge)],
                evidence: None,
                waiting: None,
            };
        }
        // Position 0 is the published chunk start state both parties
        // committed to; disputing it contradicts the cited receipt.
        Some(0) => {
            return AdjudicationOutcome {
                challenge_hash,
                verdict: Verdict::ChallengerSlashed,
                penalties: vec![slash(challenger, SlashReason::MalformedChallenge)],
                evidence: None,
                waiting: None,
            };
        }
        Some(m) => m,
    };

    // Both parties agree on the input state at m-1; the transaction between
    // m-1 and m is the disputed one.
    let agreed = challenge.state_commitments[m - 1];
    let Some(input_state) = resolve_state(agreed) else {
        // No party produced a state matching the agreed commitment: the
        // responder failed its duty to disclose.
        return AdjudicationOutcome {
            challenge_hash,
            verdict: Verdict::ExecutorSlashed,
            penalties: vec![slash(executor, SlashReason::MalformedResponse)],
            evidence: None,
            waiting: None,
        };
    };
    debug_assert_eq!(state_commitment(&input_state), agreed);
    let Some(tx) = resolve_tx(m - 1) else {
        return AdjudicationOutcome {
            challenge_hash,
            verdict: Verdict::ExecutorSlashed,
            penalties: vec![slash(executor, SlashReason::MalformedResponse)],
            evidence: None,
            waiting: None,
        };
    };

    let recomputed = match execute_transaction(&input_state, &tx, schedule) {
        Ok((state, _)) => state_commitment(&state),
        Err(_) => {
            // An over-limit transaction can never have been guaranteed;
            // treat the recomputation commitment as unattainable so every
            // published claim for it is wrong.
            crate::messages::StateCommitment(hash_bytes(b"invalid-transaction"))
        }
    };

    let executor_wrong = response.state_commitments[m] != recomputed;
    let challenger_wrong = challenge.state_commitments[m] != recomputed;
    let evidence = Some(AdjudicationEvidence {
        recomputed,
        mismatch_index: m as u32,
    });

    let (verdict, penalties) = match (executor_wrong, challenger_wrong) {
        (true, false) => (
            Verdict::ExecutorSlashed,
            vec![slash(executor, SlashReason::FaultyComputation)],
        ),
        (false, true) => (
            Verdict::ChallengerSlashed,
            vec![slash(challenger, SlashReason::SpuriousChallenge)],
        ),
        (true, true) => (
            Verdict::BothSlashed,
            vec![
                slash(executor, SlashReason::FaultyComputation),
                slash(challenger, SlashReason::SpuriousChallenge),
            ],
        ),
        // Both match the recomputation yet the commitments differ: ruled
        // out by hash collision resistance; treat as a malformed challenge.
        (false, false) => (
            Verdict::ChallengerSlashed,
            vec![slash(challenger, SlashReason::MalformedChallenge)],
        ),
    };

    AdjudicationOutcome {
        challenge_hash,
        verdict,
        penalties,
        evidence,
        waiting: None,
    }
}

/// Guarantors an honest outside collector probes for a challenged
/// collection: a uniform sample of min(probe_count, guarantors), seeded
/// deterministically per (collector, challenge).
pub fn mcc_probe_plan(
    collector: &NodeId,
    challenge_hash: HashValue,
    guarantors: &[NodeId],
    probe_count: usize,
    seed: HashValue,
) -> Vec<NodeId> {
    let per_probe_seed = crate::crypto::hash_concat(&[
        &seed.0,
        b"mcc-probe",
        &collector.canonical_bytes(),
        &challenge_hash.0,
    ]);
    crate::verifier::fisher_yates_sample(guarantors.len(), per_probe_seed, probe_count)
        .into_iter()
        .map(|i| guarantors[i as usize].clone())
        .collect()
}

/// What the attestation tally concluded for one missing-collection
/// challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MccTally {
    /// The text surfaced somewhere and was forwarded; fines still apply.
    Resolved,
    /// More than 2/3 of all collectors attested: receipts may skip the
    /// collection, and sealing one slashes every guarantor.
    Skippable,
    /// Neither resolution nor a sufficient tally yet.
    Pending,
}

/// Tallies a missing-collection challenge. `valid_attestors` must already
/// be deduplicated signature-checked attestors; attestations from
/// challenged guarantors are rejected here. The threshold counts stake
/// over all collector nodes.
pub fn mcc_tally(
    attestations: &[MissingCollectionAttestation],
    guarantors: &[NodeId],
    ledger: &StakeLedger,
    resolution_seen: bool,
) -> MccTally {
    if resolution_seen {
        return MccTally::Resolved;
    }
    let mut attestors: Vec<NodeId> = Vec::new();
    for a in attestations {
        if guarantors.iter().any(|g| g == &a.attestor) {
            continue; // challenged guarantors cannot attest
        }
        if attestors.iter().any(|n| n == &a.attestor) {
            continue; // duplicates count once
        }
        attestors.push(a.attestor.clone());
    }
    match ledger.fraction_of_role(
        &attestors,
        crate::messages::Role::Collector,
        Fraction::TWO_THIRDS,
        true,
    ) {
        Ok(true) => MccTally::Skippable,
        _ => MccTally::Pending,
    }
}

/// Uniform per-challenge fines: every execution node and every challenged
/// guarantor pays the small fine, resolution or not, initiator or not.
pub fn mcc_fines(
    execution_nodes: &[NodeId],
    guarantors: &[NodeId],
    schedule: &PenaltySchedule,
) -> Vec<Penalty> {
    execution_nodes
        .iter()
        .chain(guarantors.iter())
        .map(|node| Penalty {
            node: node.clone(),
            amount: schedule.small_fine,
            reason: SlashReason::MissingCollectionFine,
        })
        .collect()
}

/// The large slash applied to every guarantor when a receipt skipping
/// their collection is sealed.
pub fn mcc_cluster_slash(guarantors: &[NodeId], schedule: &PenaltySchedule) -> Vec<Penalty> {
    guarantors
        .iter()
        .map(|node| Penalty {
            node: node.clone(),
            amount: schedule.large_slash,
            reason: SlashReason::MissingCollection,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keypair_from_seed;
    use crate::rng::HashRng;
    use crate::exec::{execute_block, MachineOp};
    use crate::messages::{
        ExecutionResult, Role, StateCommitment, WaitingProof,
    };
    use crate::spock::spock_create;
    use std::collections::BTreeMap;

    fn node(role: Role, index: u32) -> (NodeId, SecretKey) {
        let kp = keypair_from_seed(&[50 + index as u8; 32]);
        (
            NodeId {
                role,
                index,
                public_key: kp.public,
            },
            kp.secret,
        )
    }

    fn commitments(tags: &[u8]) -> Vec<StateCommitment> {
        tags.iter()
            .map(|&t| StateCommitment(hash_bytes(&[t])))
            .collect()
    }

    #[test]
    fn first_mismatch_cases() {
        let same = commitments(&[1, 2, 3]);
        assert_eq!(first_mismatch(&same, &same.clone()), None);

        let a = commitments(&[1, 2, 3]);
        let b = commitments(&[1, 9, 3]);
        assert_eq!(first_mismatch(&a, &b), Some(1));

        let c = commitments(&[1, 2, 9]);
        assert_eq!(first_mismatch(&a, &c), Some(2));
    }

    /// Fixture: a two-chunk block, the executor's honest replay, and a
    /// corrupted variant where the output of local transaction 1 (0-based)
    /// of chunk 1 was perturbed and execution continued from the bad state.
    struct Fixture {
        schedule: GasSchedule,
        txs: Vec<Transaction>,
        honest: crate::exec::BlockExecutionOutput,
        corrupt_interims: Vec<StateCommitment>,
        chunk_states: Vec<RegisterState>,
        receipt: ExecutionReceipt,
        executor: NodeId,
    }

    fn fixture() -> Fixture {
        let schedule = GasSchedule::new(10, 8);
        let txs: Vec<Transaction> = (0..4)
            .map(|i| {
                Transaction::new(vec![
                    MachineOp::Set(format!("r{i}"), 3 * i),
                    MachineOp::Set(format!("q{i}"), i + 1),
                    MachineOp::Add(format!("r{i}"), format!("q{i}")),
                    MachineOp::Add(format!("q{i}"), format!("r{i}")),
                ])
            })
            .collect();
        let honest = execute_block(&RegisterState::new(), &txs, &schedule).unwrap();
        assert_eq!(honest.chunks.len(), 2);

        // Corrupt chunk 1, local tx 1: bump a register after applying it,
        // then keep executing honestly.
        let mut state = honest.chunk_start_states[1].clone();
        let mut corrupt_interims = vec![state_commitment(&state)];
        let mut chunk_states = vec![state.clone()];
        for (local, tx) in txs[2..].iter().enumerate() {
            let (mut next, _) = execute_transaction(&state, tx, &schedule).unwrap();
            if local == 1 {
                next.set("r3", next.get("r3").wrapping_add(1));
            }
            corrupt_interims.push(state_commitment(&next));
            chunk_states.push(next.clone());
            state = next;
        }

        let (executor, exec_sk) = node(Role::Execution, 0);
        let mut chunks = honest.chunks.clone();
        // Published result carries the corrupted final state.
        let result = ExecutionResult {
            block_hash: hash_bytes(b"block"),
            previous_result_hash: hash_bytes(b"prev"),
            chunks: {
                chunks[1].start_state = *corrupt_interims.first().unwrap();
                chunks
            },
            final_state: *corrupt_interims.last().unwrap(),
        };
        let spocks: Vec<crate::messages::Spock> = honest
            .chunk_secrets
            .iter()
            .map(|z| spock_create(z, &executor))
            .collect();
        let msg = ExecutionReceipt::signing_bytes(&result, &spocks);
        let receipt = ExecutionReceipt {
            result,
            spocks,
            executor_sig: NodeSig {
                node: executor.clone(),
                sig: sign(&exec_sk, &msg),
            },
        };
        Fixture {
            schedule,
            txs,
            honest,
            corrupt_interims,
            chunk_states,
            receipt,
            executor,
        }
    }

    fn resolvers(
        fx: &Fixture,
    ) -> (
        impl Fn(usize) -> Option<Transaction> + '_,
        impl Fn(StateCommitment) -> Option<RegisterState> + '_,
    ) {
        let tx_resolver = move |local: usize| fx.txs.get(2 + local).cloned();
        let mut states: BTreeMap<StateCommitment, RegisterState> = BTreeMap::new();
        // Honest interim states for chunk 1.
        let mut s = fx.honest.chunk_start_states[1].clone();
        states.insert(state_commitment(&s), s.clone());
        for tx in &fx.txs[2..] {
            let (next, _) = execute_transaction(&s, tx, &fx.schedule).unwrap();
            states.insert(state_commitment(&next), next.clone());
            s = next;
        }
        for st in &fx.chunk_states {
            states.insert(state_commitment(st), st.clone());
        }
        let state_resolver = move |c: StateCommitment| states.get(&c).cloned();
        (tx_resolver, state_resolver)
    }

    #[test]
    fn make_fcc_requires_assignment_and_round_trips() {
        let fx = fixture();
        let (verifier, vsk) = node(Role::Verification, 7);
        let assignment = ChunkAssignment {
            indices: vec![1, 0],
            selection_sig: sign(&vsk, &fx.receipt.result.canonical_bytes()),
        };
        // Honest recomputation of chunk 1 diverges from the published
        // corrupt interims starting at position 2 (output of local tx 1).
        let honest_rechecked = crate::exec::replay_chunk(
            &fx.honest.chunk_start_states[1],
            &fx.txs[2..],
            &fx.schedule,
        )
        .unwrap();
        let fcc = make_fcc(
            &verifier,
            &vsk,
            &fx.receipt,
            &assignment,
            1,
            honest_rechecked.interims.clone(),
        )
        .unwrap();
        assert_eq!(fcc.chunk_index, 1);
        assert_eq!(
            first_mismatch(&fcc.state_commitments, &fx.corrupt_interims),
            Some(2)
        );
        // Serialization round trip.
        let decoded =
            FaultyComputationChallenge::decode_exact(&fcc.canonical_bytes()).unwrap();
        assert_eq!(decoded, fcc);

        // Refuses a chunk outside the assignment.
        let narrow = ChunkAssignment {
            indices: vec![0],
            selection_sig: assignment.selection_sig,
        };
        assert_eq!(
            make_fcc(&verifier, &vsk, &fx.receipt, &narrow, 1, honest_rechecked.interims)
                .unwrap_err(),
            ChallengeError::ChunkNotAssigned(1)
        );
    }

    fn build_fcc(fx: &Fixture, interims: Vec<StateCommitment>) -> FaultyComputationChallenge {
        let (verifier, vsk) = node(Role::Verification, 7);
        let assignment = ChunkAssignment {
            indices: vec![1],
            selection_sig: sign(&vsk, &fx.receipt.result.canonical_bytes()),
        };
        make_fcc(&verifier, &vsk, &fx.receipt, &assignment, 1, interims).unwrap()
    }

    #[test]
    fn adjudication_slashes_faulty_executor_with_evidence() {
        let fx = fixture();
        let honest = crate::exec::replay_chunk(
            &fx.honest.chunk_start_states[1],
            &fx.txs[2..],
            &fx.schedule,
        )
        .unwrap();
        let fcc = build_fcc(&fx, honest.interims);
        let (challenger, _) = node(Role::Verification, 7);
        let response = FaultyComputationResponse {
            challenge_hash: fcc.content_hash(),
            state_commitments: fx.corrupt_interims.clone(),
            executor_sig: fx.receipt.executor_sig.clone(),
        };
        let (resolve_tx, resolve_state) = resolvers(&fx);
        let outcome = adjudicate_fcc(
            &fcc,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Response(response),
            &resolve_tx,
            &resolve_state,
            &fx.schedule,
            &PenaltySchedule::default(),
        );
        assert_eq!(outcome.verdict, Verdict::ExecutorSlashed);
        assert_eq!(outcome.evidence.as_ref().unwrap().mismatch_index, 2);
        assert_eq!(outcome.penalties.len(), 1);
        assert_eq!(outcome.penalties[0].node, fx.executor);
    }

    #[test]
    fn adjudication_slashes_spurious_challenger() {
        let fx = fixture();
        // Challenger fabricates a wrong tail over an honest chunk 0.
        let honest0 = crate::exec::replay_chunk(
            &fx.honest.chunk_start_states[0],
            &fx.txs[..2],
            &fx.schedule,
        )
        .unwrap();
        let mut fabricated = honest0.interims.clone();
        let last = fabricated.len() - 1;
        fabricated[last] = StateCommitment(hash_bytes(b"made-up"));

        let (verifier, vsk) = node(Role::Verification, 9);
        let assignment = ChunkAssignment {
            indices: vec![0],
            selection_sig: sign(&vsk, &fx.receipt.result.canonical_bytes()),
        };
        let fcc = make_fcc(&verifier, &vsk, &fx.receipt, &assignment, 0, fabricated).unwrap();
        let response = FaultyComputationResponse {
            challenge_hash: fcc.content_hash(),
            state_commitments: honest0.interims.clone(),
            executor_sig: fx.receipt.executor_sig.clone(),
        };

        // Resolvers over honest chunk-0 states.
        let mut states: BTreeMap<StateCommitment, RegisterState> = BTreeMap::new();
        let mut s = fx.honest.chunk_start_states[0].clone();
        states.insert(state_commitment(&s), s.clone());
        for tx in &fx.txs[..2] {
            let (next, _) = execute_transaction(&s, tx, &fx.schedule).unwrap();
            states.insert(state_commitment(&next), next.clone());
            s = next;
        }
        let resolve_tx = |local: usize| fx.txs.get(local).cloned();
        let resolve_state = |c: StateCommitment| states.get(&c).cloned();

        let outcome = adjudicate_fcc(
            &fcc,
            &fx.executor,
            &verifier,
            ResponseOrTimeout::Response(response),
            &resolve_tx,
            &resolve_state,
            &fx.schedule,
            &PenaltySchedule::default(),
        );
        assert_eq!(outcome.verdict, Verdict::ChallengerSlashed);
        assert_eq!(outcome.penalties[0].node, verifier);
    }

    #[test]
    fn timeout_slashes_executor() {
        let fx = fixture();
        let honest = crate::exec::replay_chunk(
            &fx.honest.chunk_start_states[1],
            &fx.txs[2..],
            &fx.schedule,
        )
        .unwrap();
        let fcc = build_fcc(&fx, honest.interims);
        let (challenger, _) = node(Role::Verification, 7);
        let outcome = adjudicate_fcc(
            &fcc,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Timeout,
            &|_| None,
            &|_| None,
            &fx.schedule,
            &PenaltySchedule::default(),
        );
        assert_eq!(outcome.verdict, Verdict::ExecutorSlashed);
        assert_eq!(outcome.penalties[0].reason, SlashReason::ChallengeTimeout);
    }

    #[test]
    fn malformed_challenges_and_responses() {
        let fx = fixture();
        let honest = crate::exec::replay_chunk(
            &fx.honest.chunk_start_states[1],
            &fx.txs[2..],
            &fx.schedule,
        )
        .unwrap();
        let (challenger, _) = node(Role::Verification, 7);
        let penalty = PenaltySchedule::default();

        // Identical commitments: nothing disputed, challenger slashed.
        let fcc_same = build_fcc(&fx, fx.corrupt_interims.clone());
        let response = FaultyComputationResponse {
            challenge_hash: fcc_same.content_hash(),
            state_commitments: fx.corrupt_interims.clone(),
            executor_sig: fx.receipt.executor_sig.clone(),
        };
        let outcome = adjudicate_fcc(
            &fcc_same,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Response(response),
            &|_| None,
            &|_| None,
            &fx.schedule,
            &penalty,
        );
        assert_eq!(outcome.verdict, Verdict::ChallengerSlashed);

        // Mismatch at position 0 contradicts the cited receipt.
        let mut bad_start = honest.interims.clone();
        bad_start[0] = StateCommitment(hash_bytes(b"wrong-start"));
        let fcc_bad = build_fcc(&fx, bad_start);
        let response = FaultyComputationResponse {
            challenge_hash: fcc_bad.content_hash(),
            state_commitments: fx.corrupt_interims.clone(),
            executor_sig: fx.receipt.executor_sig.clone(),
        };
        let outcome = adjudicate_fcc(
            &fcc_bad,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Response(response),
            &|_| None,
            &|_| None,
            &fx.schedule,
            &penalty,
        );
        assert_eq!(outcome.verdict, Verdict::ChallengerSlashed);

        // Length mismatch is a protocol violation by the responder.
        let fcc = build_fcc(&fx, honest.interims.clone());
        let response = FaultyComputationResponse {
            challenge_hash: fcc.content_hash(),
            state_commitments: fx.corrupt_interims[..2].to_vec(),
            executor_sig: fx.receipt.executor_sig.clone(),
        };
        let outcome = adjudicate_fcc(
            &fcc,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Response(response),
            &|_| None,
            &|_| None,
            &fx.schedule,
            &penalty,
        );
        assert_eq!(outcome.verdict, Verdict::ExecutorSlashed);
        assert_eq!(outcome.penalties[0].reason, SlashReason::MalformedResponse);
    }

    #[test]
    fn both_parties_wrong_both_slashed() {
        let fx = fixture();
        // Challenger diverges from the executor at position 1 but is also
        // wrong there.
        let mut fabricated = fx.corrupt_interims.clone();
        fabricated[1] = StateCommitment(hash_bytes(b"also-wrong"));
        // Executor's response at position 1 replaced by garbage too.
        let mut exec_claim = fx.corrupt_interims.clone();
        exec_claim[1] = StateCommitment(hash_bytes(b"garbage"));

        let fcc = build_fcc(&fx, fabricated);
        let (challenger, _) = node(Role::Verification, 7);
        let response = FaultyComputationResponse {
            challenge_hash: fcc.content_hash(),
            state_commitments: exec_claim,
            executor_sig: fx.receipt.executor_sig.clone(),
        };
        let (resolve_tx, resolve_state) = resolvers(&fx);
        let outcome = adjudicate_fcc(
            &fcc,
            &fx.executor,
            &challenger,
            ResponseOrTimeout::Response(response),
            &resolve_tx,
            &resolve_state,
            &fx.schedule,
            &PenaltySchedule::default(),
        );
        assert_eq!(outcome.verdict, Verdict::BothSlashed);
        assert_eq!(outcome.penalties.len(), 2);
    }

    fn collectors(n: u32) -> Vec<NodeId> {
        (0..n).map(|i| node(Role::Collector, i).0).collect()
    }

    #[test]
    fn probe_plan_is_deterministic_and_clamps() {
        let gs = collectors(4);
        let (me, _) = node(Role::Collector, 9);
        let ch = hash_bytes(b"mcc");
        let seed = hash_bytes(b"seed");
        let a = mcc_probe_plan(&me, ch, &gs, 2, seed);
        let b = mcc_probe_plan(&me, ch, &gs, 2, seed);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);

        let all = mcc_probe_plan(&me, ch, &gs, 10, seed);
        assert_eq!(all.len(), 4);
        let mut sorted: Vec<u32> = all.iter().map(|n| n.index).collect();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn probe_plan_single_probe_is_uniform() {
        let gs = collectors(5);
        let (me, _) = node(Role::Collector, 9);
        let ch = hash_bytes(b"mcc");
        let mut counts = vec![0u64; 5];
        let trials = 20_000u64;
        for t in 0..trials {
            let seed = HashRng::derive_seed(hash_bytes(b"probe-uniform"), "t", t);
            let picked = mcc_probe_plan(&me, ch, &gs, 1, seed);
            counts[picked[0].index as usize] += 1;
        }
        let p = 1.0 / 5.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - trials as f64 * p).abs() < 3.0 * sigma);
        }
    }

    fn mca(attestor: &NodeId, sk: &SecretKey, collection: HashValue) -> MissingCollectionAttestation {
        let waiting = WaitingProof {
            start_mark: hash_bytes(b"mark"),
            iterations: 0,
            output: hash_bytes(b"mark"),
        };
        let msg = MissingCollectionAttestation::signing_bytes(&collection, attestor, &waiting);
        MissingCollectionAttestation {
            collection_hash: collection,
            attestor: attestor.clone(),
            waiting,
            sig: sign(sk, &msg),
        }
    }

    #[test]
    fn tally_resolution_beats_threshold_and_fines_are_uniform() {
        let mut ledger = StakeLedger::new();
        let all: Vec<(NodeId, SecretKey)> = (0..6).map(|i| node(Role::Collector, i)).collect();
        for (n, _) in &all {
            ledger.register(n.clone(), 10);
        }
        let guarantors: Vec<NodeId> = all[..3].iter().map(|(n, _)| n.clone()).collect();
        let collection = hash_bytes(b"coll");
        let attestations: Vec<_> = all[3..]
            .iter()
            .map(|(n, sk)| mca(n, sk, collection))
            .collect();

        assert_eq!(
            mcc_tally(&attestations, &guarantors, &ledger, true),
            MccTally::Resolved
        );

        let execs: Vec<NodeId> = (0..3).map(|i| node(Role::Execution, i).0).collect();
        let fines = mcc_fines(&execs, &guarantors, &PenaltySchedule::default());
        assert_eq!(fines.len(), 6);
        assert!(fines.iter().all(|p| p.amount == 1));
    }

    #[test]
    fn tally_threshold_counts_all_collectors_and_rejects_bad_attestors() {
        let mut ledger = StakeLedger::new();
        let all: Vec<(NodeId, SecretKey)> = (0..12).map(|i| node(Role::Collector, i)).collect();
        for (n, _) in &all {
            ledger.register(n.clone(), 10);
        }
        let guarantors: Vec<NodeId> = all[..3].iter().map(|(n, _)| n.clone()).collect();
        let collection = hash_bytes(b"coll");

        // 8 of 12 is exactly 2/3: not strictly more, still pending.
        let eight: Vec<_> = all[4..12]
            .iter()
            .map(|(n, sk)| mca(n, sk, collection))
            .collect();
        assert_eq!(
            mcc_tally(&eight, &guarantors, &ledger, false),
            MccTally::Pending
        );

        // A ninth distinct attestor clears it.
        let mut nine = eight.clone();
        nine.push(mca(&all[3].0, &all[3].1, collection));
        assert_eq!(
            mcc_tally(&nine, &guarantors, &ledger, false),
            MccTally::Skippable
        );

        // Guarantor attestations and duplicates do not count.
        let mut padded = eight.clone();
        padded.push(mca(&guarantors[0], &all[0].1, collection));
        padded.push(mca(&all[4].0, &all[4].1, collection));
        assert_eq!(
            mcc_tally(&padded, &guarantors, &ledger, false),
            MccTally::Pending
        );
    }
}
