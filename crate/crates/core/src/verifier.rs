//! Verification-node logic: seeded chunk self-selection, selection-proof
//! checking, and the verification pass that yields a result approval or a
//! faulty-computation challenge.
//!
//! Self-selection signs the execution result and seeds a Fisher-Yates
//! sample with the signature's hash. The signature scheme must produce one
//! unique signature per (key, message); otherwise a verifier could grind
//! alternative signatures until it likes its assignment. Anyone holding
//! the receipt, the verifier's public key, and the proof can recompute the
//! expected assignment, so deviating is detectable and attributable.

use crate::challenges::make_fcc;
use crate::codec::Canonical;
use crate::crypto::{hash_bytes, sign, verify, HashValue, PublicKey, SecretKey, SignatureBytes};
use crate::exec::{verify_chunk, GasSchedule, RegisterState};
use crate::messages::{
    Attestation, ExecutionReceipt, ExecutionResult, FaultyComputationChallenge, NodeId,
    ResultApproval, Transaction, VerificationProof,
};
use crate::rng::HashRng;
use crate::spock::spock_create;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A verifier's self-selected chunk assignment: distinct indices plus the
/// selection proof that lets anyone recompute them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkAssignment {
    pub indices: Vec<u32>,
    pub selection_sig: SignatureBytes,
}

/// Verification-node parameters: the protocol-wide sampling fraction and
/// the node's signing identity.
#[derive(Clone)]
pub struct VerifierParams {
    pub eta: f64,
    pub node: NodeId,
    pub secret: SecretKey,
}

/// Number of chunks a verifier samples: ceil(eta * chunks), at least one
/// for non-empty blocks. The epsilon guards against representation noise
/// in eta * chunks landing just above an integer.
pub fn sample_count(eta: f64, chunk_count: usize) -> usize {
    if chunk_count == 0 {
        return 0;
    }
    let raw = eta * chunk_count as f64;
    let n = (raw - 1e-9).ceil().max(1.0) as usize;
    n.min(chunk_count)
}

/// First `n` elements of a seeded Fisher-Yates permutation of `0..len`.
/// `n` greater than `len` clamps to `len` (whole-block verification).
pub fn fisher_yates_sample(len: usize, seed: HashValue, n: usize) -> Vec<u32> {
    let n = n.min(len);
    let mut indices: Vec<u32> = (0..len as u32).collect();
    let mut rng = HashRng::new(seed);
    for i in 0..n {
        let j = i + rng.next_below((len - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(n);
    indices
}

/// Runs self-selection for an execution result: sign it, hash the
/// signature into a sampling seed, and draw ceil(eta * chunks) indices.
/// Approvals bind to the result, so consistent receipts from different
/// executors share one assignment.
pub fn chunk_self_selection(
    eta: f64,
    result: &ExecutionResult,
    node: &NodeId,
    secret: &SecretKey,
) -> ChunkAssignment {
    let _ = node;
    let selection_sig = sign(secret, &result.canonical_bytes());
    let seed = hash_bytes(&selection_sig.0);
    let chunk_count = result.chunk_count();
    let n = sample_count(eta, chunk_count);
    ChunkAssignment {
        indices: fisher_yates_sample(chunk_count, seed, n),
        selection_sig,
    }
}

/// Recomputes a claimed assignment from the proof. True iff the proof is a
/// valid signature over the execution result and the indices equal the
/// recomputation from the proof's hash.
pub fn verify_selection_proof(
    receipt_result_bytes: &[u8],
    chunk_count: usize,
    verifier_pk: &PublicKey,
    selection_sig: &SignatureBytes,
    indices: &[u32],
    eta: f64,
) -> bool {
    if !verify(verifier_pk, receipt_result_bytes, selection_sig) {
        return false;
    }
    let seed = hash_bytes(&selection_sig.0);
    let n = sample_count(eta, chunk_count);
    let expected = fisher_yates_sample(chunk_count, seed, n);
    expected == indices
}

/// Chunk data a verifier fetches before re-execution: the full start state
/// and the chunk's transactions. The end state is taken from the receipt
/// itself as a commitment.
#[derive(Debug, Clone)]
pub struct ChunkData {
    pub start_state: RegisterState,
    pub transactions: Vec<Transaction>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FetchError {
    #[error("chunk {0} data unavailable")]
    Unavailable(u32),
}

/// Supplies chunk data for verification. Implementations hand back state
/// and transaction text; `check_assigned_chunks` hash-checks both against
/// the receipt before trusting them.
pub trait ChunkDataFetcher {
    fn fetch(&self, chunk_index: u32) -> Result<ChunkData, FetchError>;
}

impl<F> ChunkDataFetcher for F
where
    F: Fn(u32) -> Result<ChunkData, FetchError>,
{
    fn fetch(&self, chunk_index: u32) -> Result<ChunkData, FetchError> {
        self(chunk_index)
    }
}

/// Outcome of a verification pass over an assignment.
#[derive(Debug, Clone)]
pub enum VerificationOutcome {
    /// Every assigned chunk checked out; here is the signed approval.
    Approve(ResultApproval),
    /// An assigned chunk failed re-execution; here is the challenge.
    Challenge(FaultyComputationChallenge),
    /// Chunk data could not be fetched or failed its hash check. Distinct
    /// from a computation fault; the caller escalates it.
    DataUnavailable { chunk_index: u32 },
}

/// Verifies every chunk in the assignment in order. All checks passing
/// yields a `ResultApproval` whose proof carries one trace-secret proof
/// per assigned chunk; the first failing chunk yields a challenge carrying
/// the verifier's recomputed interim commitments.
pub fn check_assigned_chunks(
    params: &VerifierParams,
    receipt: &ExecutionReceipt,
    assignment: &ChunkAssignment,
    fetcher: &dyn ChunkDataFetcher,
    schedule: &GasSchedule,
) -> VerificationOutcome {
    let result = &receipt.result;
    let mut spocks = Vec::with_capacity(assignment.indices.len());

    for &chunk_index in &assignment.indices {
        let chunk = &result.chunks[chunk_index as usize];
        let data = match fetcher.fetch(chunk_index) {
            Ok(d) => d,
            Err(FetchError::Unavailable(i)) => {
                return VerificationOutcome::DataUnavailable { chunk_index: i }
            }
        };
        // Data is only trusted once it hashes to the receipt's commitments.
        if crate::exec::state_commitment(&data.start_state) != chunk.start_state {
            return VerificationOutcome::DataUnavailable { chunk_index };
        }
        let check = match verify_chunk(
            &data.start_state,
            &data.transactions,
            chunk.leading_tx_gas,
            result.chunk_end_state(chunk_index as usize),
            result.next_chunk_leading_gas(chunk_index as usize),
            chunk.gas_used,
            schedule,
        ) {
            Ok(c) => c,
            Err(_) => return VerificationOutcome::DataUnavailable { chunk_index },
        };
        match check.verdict {
            Ok(()) => spocks.push(spock_create(&check.replay.trace_secret, &params.node)),
            Err(_fault) => {
                let fcc = make_fcc(
                    &params.node,
                    &params.secret,
                    receipt,
                    assignment,
                    chunk_index,
                    check.replay.interims,
                )
                .expect("challenged chunk is in the assignment");
                return VerificationOutcome::Challenge(fcc);
            }
        }
    }

    let result_hash = result.content_hash();
    let attestation = Attestation {
        result_hash,
        sig: sign(&params.secret, &result_hash.0),
    };
    let proof = VerificationProof {
        indices: assignment.indices.clone(),
        selection_sig: assignment.selection_sig,
        spocks,
    };
    let msg = ResultApproval::signing_bytes(&attestation, &proof);
    let verifier_sig = crate::messages::NodeSig {
        node: params.node.clone(),
        sig: sign(&params.secret, &msg),
    };
    VerificationOutcome::Approve(ResultApproval {
        attestation,
        proof,
        verifier_sig,
    })
}
