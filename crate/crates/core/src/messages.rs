//! Wire records exchanged between nodes.
//!
//! Five messages drive the pipeline: guaranteed collections, blocks,
//! execution receipts, result approvals, and block seals. Challenge and
//! attestation records ride inside blocks. Every record has a canonical
//! byte encoding (see [`crate::codec`]) used for hashing and signing, plus
//! a JSON rendering via serde for debugging and reports.

use crate::codec::{Canonical, CodecError, Reader};
use crate::crypto::{HashValue, PublicKey, SignatureBytes};
use crate::exec::MachineOp;
use serde::{Deserialize, Serialize};

macro_rules! canonical_struct {
    ($ty:ty { $($field:ident),+ $(,)? }) => {
        impl Canonical for $ty {
            fn write(&self, out: &mut Vec<u8>) {
                $(self.$field.write(out);)+
            }
            fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
                Ok(Self { $($field: Canonical::read(r)?),+ })
            }
        }
    };
}

/// Service a staked node provides. A physical host may run several roles,
/// but each (role, index) stakes and is slashed independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Collector,
    Consensus,
    Execution,
    Verification,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::Collector,
        Role::Consensus,
        Role::Execution,
        Role::Verification,
    ];

    fn tag(self) -> u8 {
        match self {
            Role::Collector => 0,
            Role::Consensus => 1,
            Role::Execution => 2,
            Role::Verification => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, CodecError> {
        Ok(match tag {
            0 => Role::Collector,
            1 => Role::Consensus,
            2 => Role::Execution,
            3 => Role::Verification,
            _ => return Err(CodecError::InvalidTag { what: "Role", tag }),
        })
    }
}

impl Canonical for Role {
    fn write(&self, out: &mut Vec<u8>) {
        out.push(self.tag());
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Role::from_tag(r.u8()?)
    }
}

/// Network identity: (role, index) is unique network-wide and the staking
/// public key is fixed for the epoch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub role: Role,
    pub index: u32,
    pub public_key: PublicKey,
}

canonical_struct!(NodeId { role, index, public_key });

impl NodeId {
    /// Routing key without the public key, for tables and logs.
    pub fn addr(&self) -> (Role, u32) {
        (self.role, self.index)
    }
}

/// A signature attributed to a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSig {
    pub node: NodeId,
    pub sig: SignatureBytes,
}

canonical_struct!(NodeSig { node, sig });

/// Commitment to a world state (hash of the canonical register map).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateCommitment(pub HashValue);

impl Canonical for StateCommitment {
    fn write(&self, out: &mut Vec<u8>) {
        self.0.write(out);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(StateCommitment(HashValue::read(r)?))
    }
}

/// A transaction: a list of machine operations with its declared gas.
/// `id` is the content hash of (ops, declared_gas); constructors derive it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: HashValue,
    pub ops: Vec<MachineOp>,
    pub declared_gas: u64,
}

canonical_struct!(Transaction { id, ops, declared_gas });

impl Transaction {
    pub fn new(ops: Vec<MachineOp>) -> Self {
        let declared_gas: u64 = ops.iter().map(|op| op.cost()).sum();
        let mut body = Vec::new();
        ops.write(&mut body);
        declared_gas.write(&mut body);
        Transaction {
            id: crate::crypto::hash_bytes(&body),
            ops,
            declared_gas,
        }
    }

    /// True iff the declared gas matches the op cost sum and the id matches
    /// the content.
    pub fn is_well_formed(&self) -> bool {
        let expect = Transaction::new(self.ops.clone());
        expect.declared_gas == self.declared_gas && expect.id == self.id
    }
}

/// Full text of a collection, stored by its guarantors and fetched on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionBody {
    pub cluster_index: u32,
    pub transactions: Vec<Transaction>,
}

canonical_struct!(CollectionBody { cluster_index, transactions });

/// Reference to a collection whose storage more than 2/3 of its cluster
/// has signed for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuaranteedCollection {
    pub collection_hash: HashValue,
    pub cluster_index: u32,
    pub guarantor_sigs: Vec<NodeSig>,
}

canonical_struct!(GuaranteedCollection {
    collection_hash,
    cluster_index,
    guarantor_sigs,
});

impl GuaranteedCollection {
    pub fn guarantors(&self) -> impl Iterator<Item = &NodeId> {
        self.guarantor_sigs.iter().map(|s| &s.node)
    }
}

/// Why a stake changed. Journaled alongside every ledger mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashReason {
    GenesisStake,
    FaultyComputation,
    SpuriousChallenge,
    ChallengeTimeout,
    MalformedChallenge,
    MalformedResponse,
    MissingCollectionFine,
    MissingCollection,
}

impl Canonical for SlashReason {
    fn write(&self, out: &mut Vec<u8>) {
        let tag: u8 = match self {
            SlashReason::GenesisStake => 0,
            SlashReason::FaultyComputation => 1,
            SlashReason::SpuriousChallenge => 2,
            SlashReason::ChallengeTimeout => 3,
            SlashReason::MalformedChallenge => 4,
            SlashReason::MalformedResponse => 5,
            SlashReason::MissingCollectionFine => 6,
            SlashReason::MissingCollection => 7,
        };
        out.push(tag);
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(match r.u8()? {
            0 => SlashReason::GenesisStake,
            1 => SlashReason::FaultyComputation,
            2 => SlashReason::SpuriousChallenge,
            3 => SlashReason::ChallengeTimeout,
            4 => SlashReason::MalformedChallenge,
            5 => SlashReason::MalformedResponse,
            6 => SlashReason::MissingCollectionFine,
            7 => SlashReason::MissingCollection,
            tag => return Err(CodecError::InvalidTag { what: "SlashReason", tag }),
        })
    }
}

/// Network-infrastructure state update journaled in a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeUpdate {
    pub node: NodeId,
    pub delta: i64,
    pub reason: SlashReason,
    pub challenge_ref: Option<HashValue>,
}

canonical_struct!(StakeUpdate { node, delta, reason, challenge_ref });

/// Proof that a prescribed interval elapsed: an iterated hash chain over
/// a start mark. Stands in for a verifiable delay function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaitingProof {
    pub start_mark: HashValue,
    pub iterations: u64,
    pub output: HashValue,
}

canonical_struct!(WaitingProof { start_mark, iterations, output });

/// An interval of a block's transactions, sized for independent
/// verification. Gas bounds keep chunk workloads comparable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start_state: StateCommitment,
    pub leading_tx_gas: u64,
    pub start_tx_index: u32,
    pub gas_used: u64,
}

canonical_struct!(Chunk {
    start_state,
    leading_tx_gas,
    start_tx_index,
    gas_used,
});

/// An executor's commitment to a block's chunked outputs and final state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub block_hash: HashValue,
    pub previous_result_hash: HashValue,
    pub chunks: Vec<Chunk>,
    pub final_state: StateCommitment,
}

canonical_struct!(ExecutionResult {
    block_hash,
    previous_result_hash,
    chunks,
    final_state,
});

impl ExecutionResult {
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// State the computation started from. Empty blocks carry no chunks and
    /// start where they end.
    pub fn start_state(&self) -> StateCommitment {
        self.chunks
            .first()
            .map(|c| c.start_state)
            .unwrap_or(self.final_state)
    }

    /// End-state commitment of chunk `i`: the next chunk's start, or the
    /// final state for the last chunk.
    pub fn chunk_end_state(&self, i: usize) -> StateCommitment {
        self.chunks
            .get(i + 1)
            .map(|c| c.start_state)
            .unwrap_or(self.final_state)
    }

    /// Leading-transaction gas of the chunk after `i`, `None` for the last.
    pub fn next_chunk_leading_gas(&self, i: usize) -> Option<u64> {
        self.chunks.get(i + 1).map(|c| c.leading_tx_gas)
    }
}

/// Identity-bound proof of knowing a chunk's execution-trace secret.
/// Operations live in [`crate::spock`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spock {
    pub pk: PublicKey,
    pub sig: SignatureBytes,
}

canonical_struct!(Spock { pk, sig });

/// Signed execution result plus one trace-secret proof per chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReceipt {
    pub result: ExecutionResult,
    pub spocks: Vec<Spock>,
    pub executor_sig: NodeSig,
}

canonical_struct!(ExecutionReceipt { result, spocks, executor_sig });

impl ExecutionReceipt {
    /// Bytes the executor signs: the result and the trace-secret proofs.
    pub fn signing_bytes(result: &ExecutionResult, spocks: &[Spock]) -> Vec<u8> {
        let mut out = result.canonical_bytes();
        spocks.to_vec().write(&mut out);
        out
    }

    pub fn verify_executor_sig(&self) -> bool {
        let msg = Self::signing_bytes(&self.result, &self.spocks);
        crate::crypto::verify(&self.executor_sig.node.public_key, &msg, &self.executor_sig.sig)
    }
}

/// Signature over an execution result hash. Binds the approval to the
/// result, not to any one receipt, so consistent receipts from different
/// executors share approvals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub result_hash: HashValue,
    pub sig: SignatureBytes,
}

canonical_struct!(Attestation { result_hash, sig });

/// Evidence that a verifier completed its self-selected checks: the chunk
/// indices, the selection proof, and one trace-secret proof per index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationProof {
    pub indices: Vec<u32>,
    pub selection_sig: SignatureBytes,
    pub spocks: Vec<Spock>,
}

canonical_struct!(VerificationProof { indices, selection_sig, spocks });

/// A verifier's approval of an execution result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultApproval {
    pub attestation: Attestation,
    pub proof: VerificationProof,
    pub verifier_sig: NodeSig,
}

canonical_struct!(ResultApproval { attestation, proof, verifier_sig });

impl ResultApproval {
    pub fn signing_bytes(attestation: &Attestation, proof: &VerificationProof) -> Vec<u8> {
        let mut out = attestation.canonical_bytes();
        proof.write(&mut out);
        out
    }

    pub fn verify_verifier_sig(&self) -> bool {
        let msg = Self::signing_bytes(&self.attestation, &self.proof);
        crate::crypto::verify(&self.verifier_sig.node.public_key, &msg, &self.verifier_sig.sig)
    }
}

/// Consensus commitment that a block's result was executed, verified by a
/// supermajority of verifiers, and survived its challenge window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSeal {
    pub block_hash: HashValue,
    pub result_hash: HashValue,
    pub executor_sigs: Vec<NodeSig>,
    pub attestation_sigs: Vec<NodeSig>,
    pub waiting: WaitingProof,
}

canonical_struct!(BlockSeal {
    block_hash,
    result_hash,
    executor_sigs,
    attestation_sigs,
    waiting,
});

/// Appeal disputing one chunk's output state, carrying the challenger's
/// full interim commitment sequence for that chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultyComputationChallenge {
    pub receipt_hash: HashValue,
    pub chunk_index: u32,
    pub assignment_indices: Vec<u32>,
    pub assignment_sig: SignatureBytes,
    pub state_commitments: Vec<StateCommitment>,
    pub verifier_sig: NodeSig,
}

canonical_struct!(FaultyComputationChallenge {
    receipt_hash,
    chunk_index,
    assignment_indices,
    assignment_sig,
    state_commitments,
    verifier_sig,
});

impl FaultyComputationChallenge {
    pub fn signing_bytes(
        receipt_hash: &HashValue,
        chunk_index: u32,
        assignment_indices: &[u32],
        assignment_sig: &SignatureBytes,
        state_commitments: &[StateCommitment],
    ) -> Vec<u8> {
        let mut out = receipt_hash.canonical_bytes();
        chunk_index.write(&mut out);
        assignment_indices.to_vec().write(&mut out);
        assignment_sig.write(&mut out);
        state_commitments.to_vec().write(&mut out);
        out
    }

    pub fn verify_sig(&self) -> bool {
        let msg = Self::signing_bytes(
            &self.receipt_hash,
            self.chunk_index,
            &self.assignment_indices,
            &self.assignment_sig,
            &self.state_commitments,
        );
        crate::crypto::verify(&self.verifier_sig.node.public_key, &msg, &self.verifier_sig.sig)
    }
}

/// Challenged executor's answer: its own interim commitments for the chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultyComputationResponse {
    pub challenge_hash: HashValue,
    pub state_commitments: Vec<StateCommitment>,
    pub executor_sig: NodeSig,
}

canonical_struct!(FaultyComputationResponse {
    challenge_hash,
    state_commitments,
    executor_sig,
});

impl FaultyComputationResponse {
    pub fn signing_bytes(challenge_hash: &HashValue, commitments: &[StateCommitment]) -> Vec<u8> {
        let mut out = challenge_hash.canonical_bytes();
        commitments.to_vec().write(&mut out);
        out
    }
}

/// Executor's claim that a guaranteed collection's text is unavailable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCollectionChallenge {
    pub block_hash: HashValue,
    pub collection_hash: HashValue,
    pub challenger_sig: NodeSig,
}

canonical_struct!(MissingCollectionChallenge {
    block_hash,
    collection_hash,
    challenger_sig,
});

impl MissingCollectionChallenge {
    pub fn signing_bytes(block_hash: &HashValue, collection_hash: &HashValue) -> Vec<u8> {
        let mut out = block_hash.canonical_bytes();
        collection_hash.write(&mut out);
        out
    }
}

/// Collector's signed report that its probes for a challenged collection
/// went unanswered for the prescribed wait.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCollectionAttestation {
    pub collection_hash: HashValue,
    pub attestor: NodeId,
    pub waiting: WaitingProof,
    pub sig: SignatureBytes,
}

canonical_struct!(MissingCollectionAttestation {
    collection_hash,
    attestor,
    waiting,
    sig,
});

impl MissingCollectionAttestation {
    pub fn signing_bytes(
        collection_hash: &HashValue,
        attestor: &NodeId,
        waiting: &WaitingProof,
    ) -> Vec<u8> {
        let mut out = collection_hash.canonical_bytes();
        attestor.write(&mut out);
        waiting.write(&mut out);
        out
    }

    pub fn verify_sig(&self) -> bool {
        let msg = Self::signing_bytes(&self.collection_hash, &self.attestor, &self.waiting);
        crate::crypto::verify(&self.attestor.public_key, &msg, &self.sig)
    }
}

/// Challenge journaled in a block so its occurrence is persisted on-chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeRecord {
    FaultyComputation(FaultyComputationChallenge),
    MissingCollection(MissingCollectionChallenge),
}

impl Canonical for ChallengeRecord {
    fn write(&self, out: &mut Vec<u8>) {
        match self {
            ChallengeRecord::FaultyComputation(c) => {
                out.push(0);
                c.write(out);
            }
            ChallengeRecord::MissingCollection(c) => {
                out.push(1);
                c.write(out);
            }
        }
    }
    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(ChallengeRecord::FaultyComputation(Canonical::read(r)?)),
            1 => Ok(ChallengeRecord::MissingCollection(Canonical::read(r)?)),
            tag => Err(CodecError::InvalidTag {
                what: "ChallengeRecord",
                tag,
            }),
        }
    }
}

/// A finalized block: ordering, entropy, payload references, seals for
/// earlier blocks, journaled challenges, and stake updates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub previous_hash: HashValue,
    pub entropy: HashValue,
    pub collections: Vec<GuaranteedCollection>,
    pub seals: Vec<BlockSeal>,
    pub challenges: Vec<ChallengeRecord>,
    pub state_updates: Vec<StakeUpdate>,
    pub consensus_sigs: Vec<NodeSig>,
}

canonical_struct!(Block {
    height,
    previous_hash,
    entropy,
    collections,
    seals,
    challenges,
    state_updates,
    consensus_sigs,
});

impl Block {
    /// Bytes the consensus committee signs: everything except the
    /// signature set itself.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.height.write(&mut out);
        self.previous_hash.write(&mut out);
        self.entropy.write(&mut out);
        self.collections.write(&mut out);
        self.seals.write(&mut out);
        self.challenges.write(&mut out);
        self.state_updates.write(&mut out);
        out
    }

    pub fn hash(&self) -> HashValue {
        self.content_hash()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keypair_from_seed;
    use crate::exec::MachineOp;

    fn node(role: Role, index: u32) -> NodeId {
        let kp = keypair_from_seed(&[index as u8 + 1; 32]);
        NodeId {
            role,
            index,
            public_key: kp.public,
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let tx = Transaction::new(vec![MachineOp::Set("a".into(), 5)]);
        assert_eq!(tx.canonical_bytes(), tx.canonical_bytes());
    }

    #[test]
    fn different_records_encode_differently() {
        let a = Transaction::new(vec![MachineOp::Set("a".into(), 5)]);
        let b = Transaction::new(vec![MachineOp::Set("a".into(), 6)]);
        assert_ne!(a.canonical_bytes(), b.canonical_bytes());

        let c1 = Chunk {
            start_state: StateCommitment(HashValue::ZERO),
            leading_tx_gas: 1,
            start_tx_index: 0,
            gas_used: 10,
        };
        let mut c2 = c1.clone();
        c2.gas_used = 11;
        assert_ne!(c1.canonical_bytes(), c2.canonical_bytes());
    }

    #[test]
    fn transaction_well_formedness() {
        let mut tx = Transaction::new(vec![MachineOp::Mul("a".into(), "b".into())]);
        assert!(tx.is_well_formed());
        tx.declared_gas += 1;
        assert!(!tx.is_well_formed());
    }

    #[test]
    fn block_round_trips() {
        let block = Block {
            height: 3,
            previous_hash: crate::crypto::hash_bytes(b"parent"),
            entropy: crate::crypto::hash_bytes(b"entropy"),
            collections: vec![GuaranteedCollection {
                collection_hash: crate::crypto::hash_bytes(b"coll"),
                cluster_index: 1,
                guarantor_sigs: vec![NodeSig {
                    node: node(Role::Collector, 0),
                    sig: SignatureBytes([3u8; 64]),
                }],
            }],
            seals: vec![],
            challenges: vec![],
            state_updates: vec![StakeUpdate {
                node: node(Role::Execution, 2),
                delta: -5,
                reason: SlashReason::FaultyComputation,
                challenge_ref: Some(HashValue::ZERO),
            }],
            consensus_sigs: vec![],
        };
        let bytes = block.canonical_bytes();
        let decoded = Block::decode_exact(&bytes).unwrap();
        assert_eq!(decoded, block);
        assert_eq!(decoded.hash(), block.hash());
    }

    #[test]
    fn empty_result_start_state_falls_back_to_final() {
        let result = ExecutionResult {
            block_hash: HashValue::ZERO,
            previous_result_hash: HashValue::ZERO,
            chunks: vec![],
            final_state: StateCommitment(crate::crypto::hash_bytes(b"s")),
        };
        assert_eq!(result.start_state(), result.final_state);
    }
}
