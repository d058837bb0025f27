//! The discrete-event simulation: node actors per role, partially
//! synchronous delivery with per-recipient delays bounded by delta_t,
//! cluster formation, adversary strategies, and scenario orchestration.
//!
//! One modeling asymmetry is deliberate: executors fetch collection text
//! from guarantors with explicit request/response rounds, because the
//! missing-collection protocol times out on exactly that exchange.
//! Verification-time chunk data is served from the receipt producer's
//! store without extra hops; the sealing wait already budgets for the
//! receipt-to-challenge round trip.

use crate::challenges::{PenaltySchedule, Verdict};
use crate::codec::Canonical;
use crate::consensus::{mca_start_mark, waiting_proof_make, ChainState, ConsensusParams};
use crate::crypto::{hash_bytes, sign, HashValue, SecretKey};
use crate::exec::{
    apply_op, chunking, execute_block, state_commitment, BlockExecutionOutput, GasSchedule,
    MachineOp, RegisterState, TraceRecorder,
};
use crate::messages::{
    Block, CollectionBody, ExecutionReceipt, ExecutionResult, FaultyComputationChallenge,
    FaultyComputationResponse, GuaranteedCollection, MissingCollectionAttestation,
    MissingCollectionChallenge, NodeId, NodeSig, ResultApproval, Role, StateCommitment,
    Transaction,
};
use crate::netsim::config::{AdversaryStrategy, ScenarioConfig};
use crate::netsim::report::{
    ChallengeOutcomeRecord, CollectionFate, CoverageRecord, FaultRecord, MccRecord, RunReport,
    SlashingRecord,
};
use crate::rng::HashRng;
use crate::spock::spock_create;
use crate::stake::StakeLedger;
use crate::verifier::{
    check_assigned_chunks, chunk_self_selection, ChunkAssignment, ChunkData, ChunkDataFetcher,
    FetchError, VerificationOutcome, VerifierParams,
};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Message delay drawn uniformly from [delta_t/4, delta_t].
pub fn sample_delay(rng: &mut HashRng, delta_t: u64) -> u64 {
    let lo = (delta_t / 4).max(1);
    rng.next_in_range(lo, delta_t)
}

/// Random partition of `count` collectors into clusters of `cluster_size`
/// (the last may be smaller), seeded by the beacon.
pub fn form_clusters(count: u32, cluster_size: u32, beacon: HashValue) -> Vec<Vec<u32>> {
    let mut indices: Vec<u32> = (0..count).collect();
    let mut rng = HashRng::new(beacon);
    rng.shuffle(&mut indices);
    indices
        .chunks(cluster_size as usize)
        .map(|c| c.to_vec())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Consensus,
    Node(Role, u32),
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Msg {
    Collection(GuaranteedCollection),
    Block(Block),
    Receipt {
        receipt: ExecutionReceipt,
        skipped: Vec<HashValue>,
    },
    Approval(ResultApproval),
    Fcc(FaultyComputationChallenge),
    FccResponse(FaultyComputationResponse),
    Mcc(MissingCollectionChallenge),
    Mca(MissingCollectionAttestation),
    /// Executor asking a guarantor for a collection's text.
    CollectionRequest {
        collection: HashValue,
        from: Target,
    },
    /// Probe from a collector resolving a challenge.
    ProbeRequest {
        collection: HashValue,
        from: u32,
    },
    /// A collection's text handed to the recipient (the body lives in the
    /// shared store; delivery marks availability).
    CollectionText {
        collection: HashValue,
    },
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum EventKind {
    Deliver(Target, Msg),
    ProposeBlock,
    /// Executor gave its guarantor requests time to answer.
    CollectionFetchTimeout { executor: u32, height: u64 },
    /// Probing collector's wait elapsed.
    ProbeTimeout { collector: u32, collection: HashValue },
    /// A withholding collector attests without probing, after the
    /// mandatory wait.
    ByzantineMca { collector: u32, collection: HashValue },
}

struct QueuedEvent {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Where a computation fault was injected: applied after the chunk-local
/// transaction completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FaultSpec {
    chunk: usize,
    local_tx: usize,
}

/// One executed block as the executor keeps it: the machine output, the
/// transaction text it executed, and the fault it injected, if any.
#[derive(Clone)]
struct StoredExecution {
    output: BlockExecutionOutput,
    collections: Vec<(HashValue, CollectionBody)>,
    txs: Vec<Transaction>,
    fault: Option<FaultSpec>,
}

#[derive(Default)]
struct ExecutorState {
    /// Blocks seen, by height.
    blocks: BTreeMap<u64, Block>,
    /// Collections whose text this executor holds.
    known_collections: BTreeSet<HashValue>,
    /// Heights executed, in order, with the internally chained result hash
    /// and full final state.
    chain: BTreeMap<u64, (HashValue, RegisterState)>,
    /// Everything ever published, by result hash.
    outputs: BTreeMap<HashValue, StoredExecution>,
    /// Own receipt hashes, to spot challenges against us.
    own_receipts: BTreeSet<HashValue>,
    /// Missing-collection attestation tallies this executor has seen.
    mca_counts: BTreeMap<HashValue, BTreeSet<u32>>,
    /// Collections this executor has challenged.
    challenged: BTreeSet<HashValue>,
    /// Per height: the skip set used when it executed, to allow
    /// re-execution if the text surfaces later.
    skips_used: BTreeMap<u64, Vec<HashValue>>,
    /// Challenges already answered.
    answered: BTreeSet<HashValue>,
}

#[derive(Default)]
struct VerifierState {
    blocks: BTreeMap<HashValue, Block>,
    /// Receipts waiting for their block.
    pending: Vec<(ExecutionReceipt, Vec<HashValue>)>,
    /// Results already processed.
    seen_results: BTreeSet<HashValue>,
    /// Results challenged by this verifier (spurious strategy bookkeeping).
    challenged_results: BTreeSet<HashValue>,
}

#[derive(Default)]
struct CollectorState {
    /// Probes sent per challenged collection, and whether one answered.
    probes_answered: BTreeMap<HashValue, bool>,
    attested: BTreeSet<HashValue>,
}

struct CollectionRecord {
    body: CollectionBody,
    guarantors: Vec<NodeId>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    schedule: GasSchedule,
    time: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    delay_rng: HashRng,
    adversary_rng: HashRng,
    keys: BTreeMap<(Role, u32), (NodeId, SecretKey)>,
    strategies: BTreeMap<(Role, u32), AdversaryStrategy>,
    clusters: Vec<Vec<u32>>,
    chain: ChainState,
    executors: Vec<ExecutorState>,
    verifiers: Vec<VerifierState>,
    collectors: Vec<CollectorState>,
    store: BTreeMap<HashValue, CollectionRecord>,
    /// Full states by commitment, for adoption after sealing.
    state_index: BTreeMap<StateCommitment, RegisterState>,
    orphan_fccs: Vec<FaultyComputationChallenge>,
    round: u64,
    done: bool,
    stalled: bool,
    events_processed: u64,
    // report accumulators
    faults: Vec<FaultRecord>,
    seal_lags: Vec<(u64, u64, u64)>,
    coverage: BTreeMap<(u64, HashValue), Vec<u32>>,
    receipts_seen: u64,
    approvals_seen: u64,
    data_unavailable: u64,
    outcome_heights: Vec<(HashValue, Verdict, u64)>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, crate::netsim::config::ConfigError> {
        cfg.validate()?;
        let master = hash_bytes(&cfg.master_seed.to_be_bytes());
        let schedule = GasSchedule::new(cfg.gas_tx_limit, cfg.gas_chunk_limit);

        // Deterministic keys and the stake table.
        let mut keys = BTreeMap::new();
        let mut ledger = StakeLedger::new();
        let counts = [
            (Role::Collector, cfg.collectors),
            (Role::Consensus, cfg.consensus),
            (Role::Execution, cfg.executors),
            (Role::Verification, cfg.verifiers),
        ];
        for (role, count) in counts {
            for index in 0..count {
                let seed = HashRng::derive_seed(master, "node-key", ((role as u64) << 32) | index as u64);
                let kp = crate::crypto::keypair_from_seed(&seed.0);
                let node = NodeId {
                    role,
                    index,
                    public_key: kp.public,
                };
                ledger.register(node.clone(), cfg.stake_per_node);
                keys.insert((role, index), (node, kp.secret));
            }
        }

        // Random beacon seeds cluster formation.
        let beacon = HashRng::derive_seed(master, "beacon", 0);
        let clusters_idx = form_clusters(cfg.collectors, cfg.cluster_size, beacon);
        let clusters: Vec<Vec<NodeId>> = clusters_idx
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&i| keys[&(Role::Collector, i)].0.clone())
                    .collect()
            })
            .collect();

        // Adversary strategy table: explicit assignments plus whole-cluster
        // withholding sugar.
        let mut strategies: BTreeMap<(Role, u32), AdversaryStrategy> = BTreeMap::new();
        for c in clusters_idx.iter().take(cfg.withholding_clusters as usize) {
            for &i in c {
                strategies.insert((Role::Collector, i), AdversaryStrategy::WithholdingCluster);
            }
        }
        for a in &cfg.adversaries {
            strategies.insert((a.role, a.index), a.strategy.clone());
        }

        let params = ConsensusParams {
            eta: cfg.eta,
            seal_wait: cfg.seal_wait(),
            vdf_rate: cfg.vdf_rate,
            response_window: cfg.response_window(),
            mca_wait: cfg.mca_wait(),
            penalties: PenaltySchedule {
                small_fine: cfg.small_fine,
                large_slash: cfg.large_slash(),
            },
            gas: schedule,
        };
        let committee: Vec<(NodeId, SecretKey)> = (0..cfg.consensus)
            .map(|i| keys[&(Role::Consensus, i)].clone())
            .collect();
        let chain = ChainState::new(params, ledger, committee, clusters, beacon);

        let mut genesis_state_index = BTreeMap::new();
        genesis_state_index.insert(state_commitment(&RegisterState::new()), RegisterState::new());

        let mut sim = Simulation {
            executors: (0..cfg.executors).map(|_| ExecutorState::default()).collect(),
            verifiers: (0..cfg.verifiers).map(|_| VerifierState::default()).collect(),
            collectors: (0..cfg.collectors).map(|_| CollectorState::default()).collect(),
            delay_rng: HashRng::new(HashRng::derive_seed(master, "delay", 0)),
            adversary_rng: HashRng::new(HashRng::derive_seed(master, "adversary", 0)),
            schedule,
            time: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            keys,
            strategies,
            clusters: clusters_idx,
            chain,
            store: BTreeMap::new(),
            state_index: genesis_state_index,
            orphan_fccs: Vec::new(),
            round: 0,
            done: false,
            stalled: false,
            events_processed: 0,
            faults: Vec::new(),
            seal_lags: Vec::new(),
            coverage: BTreeMap::new(),
            receipts_seen: 0,
            approvals_seen: 0,
            data_unavailable: 0,
            outcome_heights: Vec::new(),
            cfg,
        };
        sim.seed_workload(master);
        sim.schedule_at(sim.cfg.block_interval(), EventKind::ProposeBlock);
        Ok(sim)
    }

    /// Registers every payload collection (deterministic from the master
    /// seed) and schedules its guarantee message.
    fn seed_workload(&mut self, _master: HashValue) {
        let interval = self.cfg.block_interval();
        let per_block = scenario_workload(&self.cfg);
        for (block, collections) in per_block.into_iter().enumerate() {
            for body in collections {
                let submit_at = block as u64 * interval + 1;
                let cluster_index = body.cluster_index as usize;
                self.register_collection(body, cluster_index, submit_at);
            }
        }
    }

    fn register_collection(&mut self, body: CollectionBody, cluster_index: usize, submit_at: u64) {
        let hash = body.content_hash();
        let members = &self.clusters[cluster_index];
        let withheld = members
            .iter()
            .all(|&i| self.is_withholding(Role::Collector, i));

        // A withholding cluster guarantees with the minimum signer set; an
        // honest cluster signs with everyone.
        let required = 2 * (members.len() / 3) + 1;
        let signer_count = if withheld { required } else { members.len() };
        let guarantor_sigs: Vec<NodeSig> = members
            .iter()
            .take(signer_count)
            .map(|&i| {
                let (node, sk) = &self.keys[&(Role::Collector, i)];
                NodeSig {
                    node: node.clone(),
                    sig: sign(sk, &hash.0),
                }
            })
            .collect();
        let gc = GuaranteedCollection {
            collection_hash: hash,
            cluster_index: cluster_index as u32,
            guarantor_sigs: guarantor_sigs.clone(),
        };
        self.store.insert(
            hash,
            CollectionRecord {
                body,
                guarantors: guarantor_sigs.into_iter().map(|s| s.node).collect(),
            },
        );
        let delay = sample_delay(&mut self.delay_rng, self.cfg.delta_t);
        self.schedule_at(
            submit_at + delay,
            EventKind::Deliver(Target::Consensus, Msg::Collection(gc)),
        );
    }

    fn is_withholding(&self, role: Role, index: u32) -> bool {
        matches!(
            self.strategies.get(&(role, index)),
            Some(AdversaryStrategy::WithholdingCluster)
        )
    }

    fn strategy(&self, role: Role, index: u32) -> Option<&AdversaryStrategy> {
        self.strategies.get(&(role, index))
    }

    fn schedule_at(&mut self, time: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, seq, kind }));
    }

    fn send(&mut self, to: Target, msg: Msg) {
        let delay = sample_delay(&mut self.delay_rng, self.cfg.delta_t);
        self.schedule_at(self.time + delay, EventKind::Deliver(to, msg));
    }

    fn broadcast_roles(&mut self, roles: &[Role], msg: &Msg) {
        for &role in roles {
            let count = match role {
                Role::Collector => self.cfg.collectors,
                Role::Consensus => 0, // consensus is addressed as a unit
                Role::Execution => self.cfg.executors,
                Role::Verification => self.cfg.verifiers,
            };
            for i in 0..count {
                self.send(Target::Node(role, i), msg.clone());
            }
        }
    }

    /// Runs the scenario to completion and assembles the report.
    pub fn run(mut self) -> RunReport {
        self.run_to_completion();
        self.finish()
    }

    fn run_to_completion(&mut self) {
        while let Some(Reverse(event)) = self.queue.pop() {
            if self.done {
                break;
            }
            debug_assert!(event.time >= self.time, "event queue went backwards");
            self.time = event.time;
            self.events_processed += 1;
            self.handle(event.kind);
        }
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver(target, msg) => self.deliver(target, msg),
            EventKind::ProposeBlock => self.propose_block(),
            EventKind::CollectionFetchTimeout { executor, height } => {
                self.executor_fetch_timeout(executor, height)
            }
            EventKind::ProbeTimeout { collector, collection } => {
                self.collector_probe_timeout(collector, collection)
            }
            EventKind::ByzantineMca { collector, collection } => {
                self.send_mca(collector, collection)
            }
        }
    }

    fn deliver(&mut self, target: Target, msg: Msg) {
        match target {
            Target::Consensus => self.consensus_on(msg),
            Target::Node(Role::Execution, i) => self.executor_on(i, msg),
            Target::Node(Role::Verification, i) => self.verifier_on(i, msg),
            Target::Node(Role::Collector, i) => self.collector_on(i, msg),
            Target::Node(Role::Consensus, _) => {}
        }
    }

    // ------------------------------------------------------------------
    // Consensus committee
    // ------------------------------------------------------------------

    fn consensus_on(&mut self, msg: Msg) {
        match msg {
            Msg::Collection(gc) => {
                self.chain.on_collection(gc);
            }
            Msg::Receipt { receipt, skipped } => {
                self.receipts_seen += 1;
                if self.chain.on_receipt(&receipt, &skipped, self.time) {
                    self.retry_orphan_fccs();
                }
            }
            Msg::Approval(approval) => {
                self.approvals_seen += 1;
                self.chain.on_approval(approval);
            }
            Msg::Fcc(fcc) => {
                if !self.chain.on_fcc(fcc.clone()) {
                    self.orphan_fccs.push(fcc);
                } else {
                    self.note_detection(&fcc);
                }
            }
            Msg::FccResponse(response) => self.consensus_adjudicate(response),
            Msg::Mcc(mcc) => {
                self.chain.on_mcc(mcc);
            }
            Msg::Mca(mca) => {
                let height = self.chain.head().height;
                self.chain.on_mca(mca, height);
                self.record_new_outcomes();
            }
            Msg::CollectionText { collection } => {
                let height = self.chain.head().height;
                self.chain.on_collection_resolved(collection, height);
                self.record_new_outcomes();
            }
            _ => {}
        }
    }

    fn retry_orphan_fccs(&mut self) {
        let pending = std::mem::take(&mut self.orphan_fccs);
        for fcc in pending {
            if self.chain.on_fcc(fcc.clone()) {
                self.note_detection(&fcc);
            } else {
                self.orphan_fccs.push(fcc);
            }
        }
    }

    fn note_detection(&mut self, fcc: &FaultyComputationChallenge) {
        let Some(state) = self.chain.fccs.get(&fcc.content_hash()) else {
            return;
        };
        let result_hash = state.result_hash;
        for fault in self.faults.iter_mut() {
            if fault.result_hash == result_hash {
                fault.detected = true;
            }
        }
    }

    fn consensus_adjudicate(&mut self, response: FaultyComputationResponse) {
        let Some(state) = self.chain.fccs.get(&response.challenge_hash) else {
            return;
        };
        if state.adjudicated {
            return;
        }
        let executor_index = state.executor.index;
        let result_hash = state.result_hash;
        let chunk_index = state.challenge.chunk_index as usize;
        let Some(stored) = self.executors[executor_index as usize]
            .outputs
            .get(&result_hash)
            .cloned()
        else {
            return;
        };

        let chunk_start = stored.output.chunks[chunk_index].start_tx_index as usize;
        let chunk_end = stored
            .output
            .chunks
            .get(chunk_index + 1)
            .map(|c| c.start_tx_index as usize)
            .unwrap_or(stored.txs.len());
        let chunk_txs = stored.txs[chunk_start..chunk_end].to_vec();
        let interim_states = replay_chunk_states(
            &stored.output.chunk_start_states[chunk_index],
            &chunk_txs,
            stored
                .fault
                .filter(|f| f.chunk == chunk_index)
                .map(|f| f.local_tx),
        );
        let resolve_tx = |local: usize| chunk_txs.get(local).cloned();
        let resolve_state = |c: StateCommitment| {
            interim_states
                .iter()
                .find(|s| state_commitment(s) == c)
                .cloned()
        };
        let height = self.chain.head().height;
        if let Some(outcome) =
            self.chain
                .on_fcc_response(&response, &resolve_tx, &resolve_state, height)
        {
            self.after_outcome(result_hash, &outcome, height);
        }
    }

    fn after_outcome(
        &mut self,
        result_hash: HashValue,
        outcome: &crate::challenges::AdjudicationOutcome,
        height: u64,
    ) {
        if matches!(outcome.verdict, Verdict::ExecutorSlashed | Verdict::BothSlashed) {
            for fault in self.faults.iter_mut() {
                if fault.result_hash == result_hash {
                    fault.executor_slashed = true;
                }
            }
        }
        self.outcome_heights
            .push((outcome.challenge_hash, outcome.verdict, height));
    }

    fn record_new_outcomes(&mut self) {
        let height = self.chain.head().height;
        let known: BTreeSet<HashValue> = self
            .outcome_heights
            .iter()
            .map(|(h, _, _)| *h)
            .collect();
        let fresh: Vec<(HashValue, Verdict)> = self
            .chain
            .outcomes
            .iter()
            .filter(|o| !known.contains(&o.challenge_hash))
            .map(|o| (o.challenge_hash, o.verdict))
            .collect();
        for (hash, verdict) in fresh {
            self.outcome_heights.push((hash, verdict, height));
        }
    }

    fn propose_block(&mut self) {
        self.round += 1;
        let proposal_height = self.chain.head().height + 1;
        let timeouts = self.chain.expire_fcc_windows(self.time, proposal_height);
        let timed_out: Vec<(HashValue, crate::challenges::AdjudicationOutcome)> = timeouts
            .into_iter()
            .filter_map(|o| {
                self.chain
                    .fccs
                    .get(&o.challenge_hash)
                    .map(|s| (s.result_hash, o))
            })
            .collect();
        for (result_hash, outcome) in timed_out {
            self.after_outcome(result_hash, &outcome, proposal_height);
        }
        self.record_new_outcomes();

        let block = self.chain.propose_block(self.time);
        for seal in &block.seals {
            let height = self
                .chain
                .block_by_hash(&seal.block_hash)
                .map(|b| b.height)
                .unwrap_or(0);
            self.seal_lags
                .push((height, block.height, block.height - height));
        }
        self.broadcast_roles(
            &[Role::Collector, Role::Execution, Role::Verification],
            &Msg::Block(block),
        );

        // Termination: every payload block sealed, no challenge in flight.
        let payload_sealed = self.chain.highest_sealed >= self.cfg.blocks;
        let fccs_settled = self.chain.fccs.values().all(|f| f.adjudicated);
        let mccs_settled = self.chain.mccs.values().all(|m| m.concluded);
        if payload_sealed && fccs_settled && mccs_settled {
            self.done = true;
            return;
        }
        if self.round >= self.cfg.max_rounds() {
            self.stalled = !payload_sealed;
            self.done = true;
            return;
        }
        self.schedule_at(self.time + self.cfg.block_interval(), EventKind::ProposeBlock);
    }

    // ------------------------------------------------------------------
    // Execution nodes
    // ------------------------------------------------------------------

    fn executor_on(&mut self, index: u32, msg: Msg) {
        match msg {
            Msg::Block(block) => self.executor_on_block(index, block),
            Msg::CollectionText { collection } => {
                self.executors[index as usize]
                    .known_collections
                    .insert(collection);
                // A late text for a skipped collection triggers a full
                // re-execution if the height is still unsealed.
                let revise = self.executors[index as usize]
                    .skips_used
                    .iter()
                    .find(|(h, skips)| {
                        skips.contains(&collection) && !self.chain.seals.contains_key(h)
                    })
                    .map(|(h, _)| *h);
                if let Some(height) = revise {
                    self.executor_reexecute_from(index, height);
                } else {
                    self.executor_try_execute(index);
                }
            }
            Msg::Mca(mca) => {
                let exec = &mut self.executors[index as usize];
                exec.mca_counts
                    .entry(mca.collection_hash)
                    .or_default()
                    .insert(mca.attestor.index);
                self.executor_try_execute(index);
            }
            // Peer receipts carry nothing this executor acts on; sealed
            // state adoption goes through the shared state index.
            Msg::Receipt { .. } => {}
            _ => {}
        }
    }

    fn executor_on_block(&mut self, index: u32, block: Block) {
        // Adopt the sealed chain where it diverges from ours.
        for seal in &block.seals {
            let height = self
                .chain
                .block_by_hash(&seal.block_hash)
                .map(|b| b.height)
                .unwrap_or(0);
            let ours = self.executors[index as usize]
                .chain
                .get(&height)
                .map(|(h, _)| *h);
            if let Some(our_hash) = ours {
                if our_hash != seal.result_hash {
                    self.executor_adopt(index, height, seal.result_hash);
                }
            }
        }

        // Respond to challenges journaled against our receipts.
        let challenges: Vec<FaultyComputationChallenge> = block
            .challenges
            .iter()
            .filter_map(|c| match c {
                crate::messages::ChallengeRecord::FaultyComputation(fcc) => Some(fcc.clone()),
                _ => None,
            })
            .collect();
        for fcc in challenges {
            self.executor_maybe_respond(index, fcc);
        }

        let height = block.height;
        let missing: Vec<HashValue> = block
            .collections
            .iter()
            .map(|c| c.collection_hash)
            .filter(|h| !self.executors[index as usize].known_collections.contains(h))
            .collect();
        self.executors[index as usize].blocks.insert(height, block);

        if !missing.is_empty() {
            for hash in &missing {
                let guarantors: Vec<NodeId> = self
                    .store
                    .get(hash)
                    .map(|r| r.guarantors.clone())
                    .unwrap_or_default();
                for g in guarantors {
                    self.send(
                        Target::Node(Role::Collector, g.index),
                        Msg::CollectionRequest {
                            collection: *hash,
                            from: Target::Node(Role::Execution, index),
                        },
                    );
                }
            }
            self.schedule_at(
                self.time + 2 * self.cfg.delta_t + 1,
                EventKind::CollectionFetchTimeout { executor: index, height },
            );
        }
        self.executor_try_execute(index);
    }

    fn executor_fetch_timeout(&mut self, index: u32, height: u64) {
        let Some(block) = self.executors[index as usize].blocks.get(&height).cloned() else {
            return;
        };
        let block_hash = block.hash();
        let missing: Vec<HashValue> = block
            .collections
            .iter()
            .map(|c| c.collection_hash)
            .filter(|h| !self.executors[index as usize].known_collections.contains(h))
            .collect();
        for collection in missing {
            if !self.executors[index as usize].challenged.insert(collection) {
                continue;
            }
            let (node, sk) = self.keys[&(Role::Execution, index)].clone();
            let msg_bytes = MissingCollectionChallenge::signing_bytes(&block_hash, &collection);
            let mcc = MissingCollectionChallenge {
                block_hash,
                collection_hash: collection,
                challenger_sig: NodeSig {
                    node,
                    sig: sign(&sk, &msg_bytes),
                },
            };
            self.send(Target::Consensus, Msg::Mcc(mcc.clone()));
            self.broadcast_roles(&[Role::Collector], &Msg::Mcc(mcc));
        }
    }

    /// Executes every block whose predecessors are done and whose
    /// collections are either available or justifiably skippable.
    fn executor_try_execute(&mut self, index: u32) {
        loop {
            let next_height = self.executors[index as usize]
                .chain
                .keys()
                .next_back()
                .copied()
                .map(|h| h + 1)
                .unwrap_or(1);
            let Some(block) = self.executors[index as usize].blocks.get(&next_height).cloned()
            else {
                return;
            };
            let mut available = Vec::new();
            let mut skipped = Vec::new();
            for gc in &block.collections {
                if self.executors[index as usize]
                    .known_collections
                    .contains(&gc.collection_hash)
                {
                    available.push(gc.collection_hash);
                } else if self.executor_skip_justified(index, gc.collection_hash) {
                    skipped.push(gc.collection_hash);
                } else {
                    return; // wait for text or attestations
                }
            }
            self.executor_execute(index, &block, &available, &skipped);
        }
    }

    /// Enough attestations seen to treat the collection as missing:
    /// strictly more than 2/3 of all collectors (equal collector stakes).
    fn executor_skip_justified(&self, index: u32, collection: HashValue) -> bool {
        let Some(record) = self.store.get(&collection) else {
            return false;
        };
        let guarantor_idx: BTreeSet<u32> = record.guarantors.iter().map(|g| g.index).collect();
        let count = self.executors[index as usize]
            .mca_counts
            .get(&collection)
            .map(|s| s.iter().filter(|i| !guarantor_idx.contains(i)).count() as u64)
            .unwrap_or(0);
        3 * count > 2 * self.cfg.collectors as u64
    }

    #[allow(clippy::too_many_arguments)]
    fn executor_execute(
        &mut self,
        index: u32,
        block: &Block,
        available: &[HashValue],
        skipped: &[HashValue],
    ) {
        let height = block.height;
        let (prev_hash, start_state) = {
            let exec = &self.executors[index as usize];
            match exec.chain.get(&(height - 1)) {
                Some((h, s)) => (*h, s.clone()),
                None if height == 1 => (
                    self.chain.genesis_result.content_hash(),
                    RegisterState::new(),
                ),
                None => return,
            }
        };

        let collections: Vec<(HashValue, CollectionBody)> = available
            .iter()
            .map(|h| (*h, self.store[h].body.clone()))
            .collect();
        let txs: Vec<Transaction> = collections
            .iter()
            .flat_map(|(_, b)| b.transactions.iter().cloned())
            .collect();

        let honest = execute_block(&start_state, &txs, &self.schedule)
            .expect("workload transactions respect the gas limits");

        // The published output: honest, or corrupted per strategy.
        let strategy = self.strategy(Role::Execution, index).cloned();
        let (published, fault) = match strategy {
            Some(AdversaryStrategy::FaultyExecutor {
                target_colluders, ..
            }) if !honest.chunks.is_empty() => {
                let fault = self.pick_fault(index, &honest, &start_state, &txs, target_colluders, prev_hash, block);
                let corrupted = execute_block_with_fault(&start_state, &txs, &self.schedule, fault);
                (corrupted, Some(fault))
            }
            _ => (honest.clone(), None),
        };

        let result = ExecutionResult {
            block_hash: block.hash(),
            previous_result_hash: prev_hash,
            chunks: published.chunks.clone(),
            final_state: state_commitment(&published.final_state),
        };
        let result_hash = result.content_hash();
        let honest_result = ExecutionResult {
            block_hash: block.hash(),
            previous_result_hash: prev_hash,
            chunks: honest.chunks.clone(),
            final_state: state_commitment(&honest.final_state),
        };

        // Materialize the states the network may later need.
        self.state_index
            .insert(state_commitment(&published.final_state), published.final_state.clone());
        self.state_index
            .insert(state_commitment(&honest.final_state), honest.final_state.clone());
        for s in published.chunk_start_states.iter().chain(honest.chunk_start_states.iter()) {
            self.state_index.insert(state_commitment(s), s.clone());
        }

        let (node, sk) = self.keys[&(Role::Execution, index)].clone();
        let spocks: Vec<crate::messages::Spock> = published
            .chunk_secrets
            .iter()
            .map(|z| spock_create(z, &node))
            .collect();
        let msg_bytes = ExecutionReceipt::signing_bytes(&result, &spocks);
        let receipt = ExecutionReceipt {
            result: result.clone(),
            spocks,
            executor_sig: NodeSig {
                node: node.clone(),
                sig: sign(&sk, &msg_bytes),
            },
        };

        if let Some(f) = fault {
            self.faults.push(FaultRecord {
                height,
                result_hash,
                executor_index: index,
                chunk_index: f.chunk as u32,
                detected: false,
                executor_slashed: false,
                sealed: false,
            });
        }

        let exec = &mut self.executors[index as usize];
        exec.outputs.insert(
            result_hash,
            StoredExecution {
                output: published,
                collections: collections.clone(),
                txs: txs.clone(),
                fault,
            },
        );
        // Internal chaining follows the honest computation; adoption of a
        // sealed foreign result replaces it later if needed.
        exec.chain
            .insert(height, (honest_result.content_hash(), honest.final_state.clone()));
        exec.own_receipts.insert(receipt.content_hash());
        exec.skips_used.insert(height, skipped.to_vec());
        if fault.is_some() {
            // The corrupted variant must also be answerable in challenges.
            exec.outputs.insert(
                honest_result.content_hash(),
                StoredExecution {
                    output: honest,
                    collections,
                    txs: txs.clone(),
                    fault: None,
                },
            );
        }

        let msg = Msg::Receipt {
            receipt,
            skipped: skipped.to_vec(),
        };
        self.send(Target::Consensus, msg.clone());
        self.broadcast_roles(&[Role::Verification, Role::Execution], &msg);
    }

    /// Chooses where a faulty executor corrupts. Plain strategy rotates
    /// pseudo-randomly; the colluder-targeting variant grinds for a chunk
    /// that lands in some colluding partner's assignment of the corrupted
    /// result.
    #[allow(clippy::too_many_arguments)]
    fn pick_fault(
        &mut self,
        index: u32,
        honest: &BlockExecutionOutput,
        start_state: &RegisterState,
        txs: &[Transaction],
        target_colluders: bool,
        prev_hash: HashValue,
        block: &Block,
    ) -> FaultSpec {
        let chunk_count = honest.chunks.len();
        let pick_local = |rng: &mut HashRng, chunk: usize| -> usize {
            let start = honest.chunks[chunk].start_tx_index as usize;
            let end = honest
                .chunks
                .get(chunk + 1)
                .map(|c| c.start_tx_index as usize)
                .unwrap_or(honest.per_tx_gas.len());
            rng.next_below((end - start) as u64) as usize
        };

        if target_colluders {
            let colluders: Vec<(u32, NodeId, SecretKey)> = self
                .strategies
                .iter()
                .filter_map(|(&(role, i), s)| match s {
                    AdversaryStrategy::ColludingVerifier { partner_executor }
                        if role == Role::Verification && *partner_executor == index =>
                    {
                        let (node, sk) = self.keys[&(role, i)].clone();
                        Some((i, node, sk))
                    }
                    _ => None,
                })
                .collect();
            if !colluders.is_empty() {
                // The corruption changes the result hash, which changes
                // every assignment; grind candidate chunks until one lands
                // in a colluder's sample of the corrupted result.
                for chunk in 0..chunk_count {
                    let local = pick_local(&mut self.adversary_rng, chunk);
                    let fault = FaultSpec { chunk, local_tx: local };
                    let corrupted =
                        execute_block_with_fault(start_state, txs, &self.schedule, fault);
                    let result = ExecutionResult {
                        block_hash: block.hash(),
                        previous_result_hash: prev_hash,
                        chunks: corrupted.chunks.clone(),
                        final_state: state_commitment(&corrupted.final_state),
                    };
                    for (_, node, sk) in &colluders {
                        let assignment =
                            chunk_self_selection(self.cfg.eta, &result, node, sk);
                        if assignment.indices.contains(&(chunk as u32)) {
                            return fault;
                        }
                    }
                }
            }
        }
        let chunk = self.adversary_rng.next_below(chunk_count as u64) as usize;
        let local_tx = pick_local(&mut self.adversary_rng, chunk);
        FaultSpec { chunk, local_tx }
    }

    fn executor_maybe_respond(&mut self, index: u32, fcc: FaultyComputationChallenge) {
        let challenge_hash = fcc.content_hash();
        {
            let exec = &self.executors[index as usize];
            if !exec.own_receipts.contains(&fcc.receipt_hash)
                || exec.answered.contains(&challenge_hash)
            {
                return;
            }
        }
        if let Some(AdversaryStrategy::FaultyExecutor {
            respond_to_challenges: false,
            ..
        }) = self.strategy(Role::Execution, index)
        {
            return; // let the window lapse
        }
        // Resolve the stored execution via the challenged result.
        let Some(result_hash) = self
            .chain
            .fccs
            .get(&challenge_hash)
            .map(|s| s.result_hash)
        else {
            return;
        };
        let Some(stored) = self.executors[index as usize].outputs.get(&result_hash) else {
            return;
        };
        if fcc.chunk_index as usize >= stored.output.interim_commitments.len() {
            return;
        }
        let commitments = stored.output.interim_commitments[fcc.chunk_index as usize].clone();
        let (node, sk) = self.keys[&(Role::Execution, index)].clone();
        let msg_bytes = FaultyComputationResponse::signing_bytes(&challenge_hash, &commitments);
        let response = FaultyComputationResponse {
            challenge_hash,
            state_commitments: commitments,
            executor_sig: NodeSig {
                node,
                sig: sign(&sk, &msg_bytes),
            },
        };
        self.executors[index as usize].answered.insert(challenge_hash);
        self.send(Target::Consensus, Msg::FccResponse(response));
    }

    fn executor_adopt(&mut self, index: u32, height: u64, sealed_result: HashValue) {
        // Fetch the sealed result's final state from the network.
        let Some(record) = self.chain.results.get(&sealed_result) else {
            return;
        };
        let final_commit = record.result.final_state;
        let Some(state) = self.state_index.get(&final_commit).cloned() else {
            return;
        };
        self.executors[index as usize]
            .chain
            .insert(height, (sealed_result, state));
        self.executor_reexecute_from(index, height + 1);
    }

    fn executor_reexecute_from(&mut self, index: u32, from_height: u64) {
        let above: Vec<u64> = self.executors[index as usize]
            .chain
            .keys()
            .copied()
            .filter(|&h| h >= from_height)
            .collect();
        for h in above {
            self.executors[index as usize].chain.remove(&h);
        }
        self.executor_try_execute(index);
    }

    // ------------------------------------------------------------------
    // Verification nodes
    // ------------------------------------------------------------------

    fn verifier_on(&mut self, index: u32, msg: Msg) {
        match msg {
            Msg::Block(block) => {
                self.verifiers[index as usize]
                    .blocks
                    .insert(block.hash(), block);
                self.verifier_drain_pending(index);
            }
            Msg::Receipt { receipt, skipped } => {
                self.verifiers[index as usize].pending.push((receipt, skipped));
                self.verifier_drain_pending(index);
            }
            _ => {}
        }
    }

    fn verifier_drain_pending(&mut self, index: u32) {
        let pending = std::mem::take(&mut self.verifiers[index as usize].pending);
        for (receipt, skipped) in pending {
            let block_known = self.verifiers[index as usize]
                .blocks
                .contains_key(&receipt.result.block_hash);
            if block_known {
                self.verifier_process_receipt(index, receipt, skipped);
            } else {
                self.verifiers[index as usize].pending.push((receipt, skipped));
            }
        }
    }

    fn verifier_process_receipt(
        &mut self,
        index: u32,
        receipt: ExecutionReceipt,
        skipped: Vec<HashValue>,
    ) {
        let result_hash = receipt.result.content_hash();
        if !self.verifiers[index as usize].seen_results.insert(result_hash) {
            return;
        }
        let block = self.verifiers[index as usize].blocks[&receipt.result.block_hash].clone();
        let (node, sk) = self.keys[&(Role::Verification, index)].clone();
        let strategy = self.strategy(Role::Verification, index).cloned();

        let assignment = chunk_self_selection(self.cfg.eta, &receipt.result, &node, &sk);
        self.record_coverage(index, &receipt, &assignment, &strategy);

        match strategy {
            None => self.verifier_honest(index, &node, &sk, receipt, skipped, block, assignment),
            Some(AdversaryStrategy::LazyVerifier) => {
                // Copy the executor's trace-secret proofs instead of
                // re-executing.
                let spocks: Vec<crate::messages::Spock> = assignment
                    .indices
                    .iter()
                    .map(|&i| receipt.spocks[i as usize].clone())
                    .collect();
                let approval = build_approval(&node, &sk, result_hash, &assignment, spocks);
                self.send(Target::Consensus, Msg::Approval(approval));
            }
            Some(AdversaryStrategy::SpuriousChallenger) => {
                self.verifier_spurious(index, &node, &sk, receipt, skipped, block, assignment)
            }
            Some(AdversaryStrategy::ColludingVerifier { partner_executor }) => {
                if receipt.executor_sig.node.index == partner_executor
                    && receipt.executor_sig.node.role == Role::Execution
                {
                    // Leaked trace secrets from the partner.
                    let Some(stored) = self.executors[partner_executor as usize]
                        .outputs
                        .get(&result_hash)
                    else {
                        return;
                    };
                    let spocks: Vec<crate::messages::Spock> = assignment
                        .indices
                        .iter()
                        .map(|&i| spock_create(&stored.output.chunk_secrets[i as usize], &node))
                        .collect();
                    let approval = build_approval(&node, &sk, result_hash, &assignment, spocks);
                    self.send(Target::Consensus, Msg::Approval(approval));
                }
                // Withholds approval from every other executor's results.
            }
            Some(_) => {}
        }
    }

    fn record_coverage(
        &mut self,
        verifier_index: u32,
        receipt: &ExecutionReceipt,
        assignment: &ChunkAssignment,
        strategy: &Option<AdversaryStrategy>,
    ) {
        if receipt.executor_sig.node.index != 0 || strategy.is_some() {
            return; // reference executor only, honest verifiers only
        }
        let Some(height) = self
            .chain
            .block_by_hash(&receipt.result.block_hash)
            .map(|b| b.height)
        else {
            return;
        };
        let counts = self
            .coverage
            .entry((height, receipt.result.content_hash()))
            .or_insert_with(|| vec![0; receipt.result.chunk_count()]);
        let _ = verifier_index;
        for &i in &assignment.indices {
            counts[i as usize] += 1;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn verifier_honest(
        &mut self,
        index: u32,
        node: &NodeId,
        sk: &SecretKey,
        receipt: ExecutionReceipt,
        skipped: Vec<HashValue>,
        block: Block,
        assignment: ChunkAssignment,
    ) {
        // Cross-check the receipt's transaction basis against the block:
        // collections minus justified skips, with bodies hash-checked.
        let Some(fetcher) = self.build_fetcher(&receipt, &skipped, &block) else {
            self.data_unavailable += 1;
            return; // nothing to attest either way
        };
        let params = VerifierParams {
            eta: self.cfg.eta,
            node: node.clone(),
            secret: sk.clone(),
        };
        match check_assigned_chunks(&params, &receipt, &assignment, &fetcher, &self.schedule) {
            VerificationOutcome::Approve(approval) => {
                self.send(Target::Consensus, Msg::Approval(approval));
            }
            VerificationOutcome::Challenge(fcc) => {
                self.verifiers[index as usize]
                    .challenged_results
                    .insert(receipt.result.content_hash());
                self.send(Target::Consensus, Msg::Fcc(fcc));
            }
            VerificationOutcome::DataUnavailable { .. } => {
                self.data_unavailable += 1;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn verifier_spurious(
        &mut self,
        index: u32,
        node: &NodeId,
        sk: &SecretKey,
        receipt: ExecutionReceipt,
        skipped: Vec<HashValue>,
        block: Block,
        assignment: ChunkAssignment,
    ) {
        if receipt.result.chunks.is_empty() {
            return;
        }
        if !self.verifiers[index as usize]
            .challenged_results
            .insert(receipt.result.content_hash())
        {
            return;
        }
        let Some(fetcher) = self.build_fetcher(&receipt, &skipped, &block) else {
            return;
        };
        let chunk_index = assignment.indices[0];
        let Ok(data) = fetcher.fetch(chunk_index) else {
            return;
        };
        let replay = crate::exec::replay_chunk(&data.start_state, &data.transactions, &self.schedule);
        let Ok(replay) = replay else { return };
        let mut fabricated = replay.interims;
        let last = fabricated.len() - 1;
        fabricated[last] = StateCommitment(hash_bytes(
            &[&fabricated[last].0 .0[..], b"disputed"].concat(),
        ));
        if let Ok(fcc) = crate::challenges::make_fcc(
            node,
            sk,
            &receipt,
            &assignment,
            chunk_index,
            fabricated,
        ) {
            self.send(Target::Consensus, Msg::Fcc(fcc));
        }
    }

    /// Chunk data served by the receipt's producer, cross-checked against
    /// the block's collection hashes. Returns None when the receipt's
    /// transaction basis cannot be validated.
    fn build_fetcher(
        &self,
        receipt: &ExecutionReceipt,
        skipped: &[HashValue],
        block: &Block,
    ) -> Option<ReceiptDataFetcher> {
        let executor = receipt.executor_sig.node.index;
        let stored = self
            .executors
            .get(executor as usize)?
            .outputs
            .get(&receipt.result.content_hash())?;

        // The receipt must cover exactly the block's collections minus its
        // declared skips, in order, and every body must match its hash.
        let expected: Vec<HashValue> = block
            .collections
            .iter()
            .map(|c| c.collection_hash)
            .filter(|h| !skipped.contains(h))
            .collect();
        let served: Vec<HashValue> = stored.collections.iter().map(|(h, _)| *h).collect();
        if expected != served {
            return None;
        }
        for (hash, body) in &stored.collections {
            if body.content_hash() != *hash {
                return None;
            }
        }
        Some(ReceiptDataFetcher {
            chunk_start_states: stored.output.chunk_start_states.clone(),
            chunks: stored.output.chunks.clone(),
            txs: stored.txs.clone(),
        })
    }

    // ------------------------------------------------------------------
    // Collector nodes
    // ------------------------------------------------------------------

    fn collector_on(&mut self, index: u32, msg: Msg) {
        match msg {
            Msg::CollectionRequest { collection, from } => {
                if self.is_withholding(Role::Collector, index) {
                    return;
                }
                let Some(record) = self.store.get(&collection) else {
                    return;
                };
                if record.guarantors.iter().any(|g| g.index == index) {
                    self.send(from, Msg::CollectionText { collection });
                }
            }
            Msg::ProbeRequest { collection, from } => {
                if self.is_withholding(Role::Collector, index) {
                    return;
                }
                let Some(record) = self.store.get(&collection) else {
                    return;
                };
                if record.guarantors.iter().any(|g| g.index == index) {
                    self.send(
                        Target::Node(Role::Collector, from),
                        Msg::CollectionText { collection },
                    );
                }
            }
            Msg::CollectionText { collection } => {
                // An answered probe: forward the text to the execution
                // nodes (and the committee, which closes the challenge).
                let answered = self.collectors[index as usize]
                    .probes_answered
                    .insert(collection, true)
                    .unwrap_or(false);
                if !answered {
                    let msg = Msg::CollectionText { collection };
                    self.send(Target::Consensus, msg.clone());
                    self.broadcast_roles(&[Role::Execution, Role::Verification], &msg);
                }
            }
            Msg::Mcc(mcc) => self.collector_on_mcc(index, mcc),
            Msg::Block(_) => {}
            _ => {}
        }
    }

    fn collector_on_mcc(&mut self, index: u32, mcc: MissingCollectionChallenge) {
        let collection = mcc.collection_hash;
        let Some(record) = self.store.get(&collection) else {
            return;
        };
        let in_cluster = self.clusters[record.body.cluster_index as usize].contains(&index);
        let is_guarantor = record.guarantors.iter().any(|g| g.index == index);

        if self.is_withholding(Role::Collector, index) {
            // Withholding non-guarantors attest to boost the challenge;
            // they still observe the mandatory wait so the proof is real.
            if !is_guarantor && !self.collectors[index as usize].attested.contains(&collection) {
                self.schedule_at(
                    self.time + self.cfg.mca_wait(),
                    EventKind::ByzantineMca { collector: index, collection },
                );
            }
            return;
        }
        if in_cluster {
            return; // honest members answer probes instead
        }
        if self.collectors[index as usize]
            .probes_answered
            .contains_key(&collection)
        {
            return; // already probing
        }
        self.collectors[index as usize]
            .probes_answered
            .insert(collection, false);
        let (node, _) = self.keys[&(Role::Collector, index)].clone();
        let probe_seed = HashRng::derive_seed(
            hash_bytes(&self.cfg.master_seed.to_be_bytes()),
            "probe-plan",
            0,
        );
        let targets = crate::challenges::mcc_probe_plan(
            &node,
            mcc.content_hash(),
            &record.guarantors,
            self.cfg.probe_count as usize,
            probe_seed,
        );
        for g in targets {
            self.send(
                Target::Node(Role::Collector, g.index),
                Msg::ProbeRequest { collection, from: index },
            );
        }
        // Wait out the probe round trip before attesting.
        self.schedule_at(
            self.time + 2 * self.cfg.delta_t,
            EventKind::ProbeTimeout { collector: index, collection },
        );
    }

    fn collector_probe_timeout(&mut self, index: u32, collection: HashValue) {
        if self.collectors[index as usize]
            .probes_answered
            .get(&collection)
            .copied()
            .unwrap_or(false)
        {
            return;
        }
        self.send_mca(index, collection);
    }

    fn send_mca(&mut self, index: u32, collection: HashValue) {
        if !self.collectors[index as usize].attested.insert(collection) {
            return;
        }
        let (node, sk) = self.keys[&(Role::Collector, index)].clone();
        let waiting = waiting_proof_make(
            mca_start_mark(collection, &node),
            self.cfg.mca_wait(),
            self.cfg.vdf_rate,
        );
        let msg_bytes =
            MissingCollectionAttestation::signing_bytes(&collection, &node, &waiting);
        let mca = MissingCollectionAttestation {
            collection_hash: collection,
            attestor: node,
            waiting,
            sig: sign(&sk, &msg_bytes),
        };
        self.send(Target::Consensus, Msg::Mca(mca.clone()));
        self.broadcast_roles(&[Role::Execution], &Msg::Mca(mca));
    }

    // ------------------------------------------------------------------
    // Report assembly
    // ------------------------------------------------------------------

    fn finish(mut self) -> RunReport {
        // Outcomes applied during the terminating proposal (for example a
        // cluster slash triggered by the final seal) still need recording.
        self.record_new_outcomes();
        let sealed_chain: Vec<(u64, HashValue)> = self
            .chain
            .seals
            .iter()
            .filter(|(h, _)| **h > 0)
            .map(|(h, s)| (*h, s.result_hash))
            .collect();
        let sealed_payload = sealed_chain
            .iter()
            .filter(|(h, _)| *h <= self.cfg.blocks)
            .count() as u64;
        let final_state = sealed_chain
            .last()
            .and_then(|(_, rh)| self.chain.results.get(rh))
            .map(|r| r.result.final_state);

        for fault in self.faults.iter_mut() {
            fault.sealed = sealed_chain
                .iter()
                .any(|(h, rh)| *h == fault.height && *rh == fault.result_hash);
        }

        let slashings: Vec<SlashingRecord> = self
            .chain
            .ledger
            .journal()
            .iter()
            .filter(|e| e.reason != crate::messages::SlashReason::GenesisStake)
            .map(|e| SlashingRecord {
                role: e.node.role,
                index: e.node.index,
                amount: e.delta.unsigned_abs(),
                reason: e.reason,
                height: e.height,
            })
            .collect();
        let honest_node_slashed = slashings
            .iter()
            .any(|s| !self.strategies.contains_key(&(s.role, s.index)));

        let challenge_outcomes: Vec<ChallengeOutcomeRecord> = self
            .outcome_heights
            .iter()
            .map(|(hash, verdict, height)| ChallengeOutcomeRecord {
                challenge_hash: *hash,
                verdict: *verdict,
                height: *height,
            })
            .collect();

        let mcc: Vec<MccRecord> = self
            .chain
            .mccs
            .values()
            .map(|m| MccRecord {
                collection_hash: m.challenge.collection_hash,
                resolved: m.resolved,
                skippable: self
                    .chain
                    .mcc_tally_state(&m.challenge.collection_hash)
                    .map(|t| t == crate::challenges::MccTally::Skippable)
                    .unwrap_or(false),
                cluster_slashed: m.cluster_slashed,
                attestation_count: m.attestations.len() as u32,
            })
            .collect();

        let honest_coverage: Vec<CoverageRecord> = self
            .coverage
            .iter()
            .map(|((height, result), counts)| CoverageRecord {
                height: *height,
                result_hash: *result,
                counts: counts.clone(),
            })
            .collect();

        // Approvals received but rejected at validation, per verifier.
        let mut rejected: BTreeMap<(Role, u32), u64> = BTreeMap::new();
        for record in self.chain.results.values() {
            for approval in &record.approvals {
                let ok = record
                    .groups
                    .iter()
                    .any(|g| self.chain.validate_approval(record, g, approval));
                if !ok {
                    *rejected
                        .entry(approval.verifier_sig.node.addr())
                        .or_default() += 1;
                }
            }
        }

        let collection_fates: Vec<(HashValue, CollectionFate)> = self
            .store.keys().map(|hash| {
                let skipped = sealed_chain.iter().any(|(_, rh)| {
                    self.chain
                        .results
                        .get(rh)
                        .map(|r| r.skipped_collections.contains(hash))
                        .unwrap_or(false)
                });
                (
                    *hash,
                    if skipped {
                        CollectionFate::Skipped
                    } else {
                        CollectionFate::Executed
                    },
                )
            })
            .collect();

        let max_seal_lag = self.seal_lags.iter().map(|(_, _, l)| *l).max().unwrap_or(0);
        let all_payload_sealed = sealed_payload == self.cfg.blocks;

        let mut expectation_failures = Vec::new();
        let expect = &self.cfg.expect;
        if expect.all_payload_sealed && !all_payload_sealed {
            expectation_failures.push(format!(
                "expected every payload block sealed, got {sealed_payload}/{}",
                self.cfg.blocks
            ));
        }
        if let Some(ceiling) = expect.max_seal_lag_rounds {
            if max_seal_lag > ceiling {
                expectation_failures.push(format!(
                    "seal lag {max_seal_lag} rounds exceeds ceiling {ceiling}"
                ));
            }
        }
        if expect.no_honest_slashing && honest_node_slashed {
            expectation_failures.push("an honest node lost stake".to_string());
        }

        RunReport {
            master_seed: self.cfg.master_seed,
            rounds: self.round,
            payload_blocks: self.cfg.blocks,
            sealed_payload_blocks: sealed_payload,
            all_payload_sealed,
            seal_lags: std::mem::take(&mut self.seal_lags),
            max_seal_lag,
            sealed_chain,
            final_state,
            slashings,
            faults: std::mem::take(&mut self.faults),
            challenge_outcomes,
            mcc,
            honest_coverage,
            rejected_approvals: rejected
                .into_iter()
                .map(|((role, index), count)| (role, index, count))
                .collect(),
            collection_fates,
            receipts_seen: self.receipts_seen,
            approvals_seen: self.approvals_seen,
            data_unavailable_events: self.data_unavailable,
            events_processed: self.events_processed,
            end_time: self.time,
            stalled: self.stalled,
            honest_node_slashed,
            expectation_failures,
        }
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: ScenarioConfig) -> Result<RunReport, crate::netsim::config::ConfigError> {
    Ok(Simulation::new(cfg)?.run())
}

/// Runs a scenario and also returns the finalized chain for dumping.
pub fn run_scenario_with_chain(
    cfg: ScenarioConfig,
) -> Result<(RunReport, Vec<Block>), crate::netsim::config::ConfigError> {
    let mut sim = Simulation::new(cfg)?;
    sim.run_to_completion();
    let blocks = sim.chain.blocks.clone();
    Ok((sim.finish(), blocks))
}

/// The deterministic transaction workload a scenario feeds its clusters:
/// one list of collection bodies per payload block, in submission order.
pub fn scenario_workload(cfg: &ScenarioConfig) -> Vec<Vec<CollectionBody>> {
    let master = hash_bytes(&cfg.master_seed.to_be_bytes());
    let mut rng = HashRng::new(HashRng::derive_seed(master, "workload", 0));
    let cluster_count = cfg.cluster_count() as u64;
    (0..cfg.blocks)
        .map(|block| {
            (0..cfg.collections_per_block)
                .map(|c| {
                    let cluster_index = (block * cfg.collections_per_block as u64 + c as u64)
                        % cluster_count;
                    let transactions: Vec<Transaction> = (0..cfg.collection_size)
                        .map(|_| generate_transaction(&mut rng, cfg.tx_gas))
                        .collect();
                    CollectionBody {
                        cluster_index: cluster_index as u32,
                        transactions,
                    }
                })
                .collect()
        })
        .collect()
}

/// Fetcher over a receipt producer's stored execution.
struct ReceiptDataFetcher {
    chunk_start_states: Vec<RegisterState>,
    chunks: Vec<crate::messages::Chunk>,
    txs: Vec<Transaction>,
}

impl ChunkDataFetcher for ReceiptDataFetcher {
    fn fetch(&self, chunk_index: u32) -> Result<ChunkData, FetchError> {
        let i = chunk_index as usize;
        if i >= self.chunks.len() {
            return Err(FetchError::Unavailable(chunk_index));
        }
        let start = self.chunks[i].start_tx_index as usize;
        let end = self
            .chunks
            .get(i + 1)
            .map(|c| c.start_tx_index as usize)
            .unwrap_or(self.txs.len());
        Ok(ChunkData {
            start_state: self.chunk_start_states[i].clone(),
            transactions: self.txs[start..end].to_vec(),
        })
    }
}

fn build_approval(
    node: &NodeId,
    sk: &SecretKey,
    result_hash: HashValue,
    assignment: &ChunkAssignment,
    spocks: Vec<crate::messages::Spock>,
) -> ResultApproval {
    let attestation = crate::messages::Attestation {
        result_hash,
        sig: sign(sk, &result_hash.0),
    };
    let proof = crate::messages::VerificationProof {
        indices: assignment.indices.clone(),
        selection_sig: assignment.selection_sig,
        spocks,
    };
    let msg = ResultApproval::signing_bytes(&attestation, &proof);
    ResultApproval {
        attestation,
        proof,
        verifier_sig: NodeSig {
            node: node.clone(),
            sig: sign(sk, &msg),
        },
    }
}

/// Executes a block with a register perturbation injected after one
/// transaction: execution continues honestly from the perturbed state, so
/// exactly the containing chunk fails re-execution while all later chunks
/// verify against their (corrupted) published start states.
fn execute_block_with_fault(
    start_state: &RegisterState,
    txs: &[Transaction],
    schedule: &GasSchedule,
    fault: FaultSpec,
) -> BlockExecutionOutput {
    let per_tx_gas: Vec<u64> = txs
        .iter()
        .map(|t| t.ops.iter().map(|o| o.cost()).sum())
        .collect();
    let bounds = chunking(&per_tx_gas, schedule).expect("workload fits the gas limits");

    let mut state = start_state.clone();
    let mut chunks = Vec::with_capacity(bounds.len());
    let mut chunk_secrets = Vec::with_capacity(bounds.len());
    let mut interim_commitments = Vec::with_capacity(bounds.len());
    let mut chunk_start_states = Vec::with_capacity(bounds.len());

    for (ci, &(start, gas)) in bounds.iter().enumerate() {
        let end = bounds.get(ci + 1).map(|b| b.0).unwrap_or(txs.len());
        chunk_start_states.push(state.clone());
        chunks.push(crate::messages::Chunk {
            start_state: state_commitment(&state),
            leading_tx_gas: per_tx_gas[start],
            start_tx_index: start as u32,
            gas_used: gas,
        });
        let mut interims = vec![state_commitment(&state)];
        let mut trace = TraceRecorder::new();
        for (local, tx) in txs[start..end].iter().enumerate() {
            for op in &tx.ops {
                apply_op(&mut state, op);
                trace.record(op, &state);
            }
            if ci == fault.chunk && local == fault.local_tx {
                // A register the workload pool never writes, so the
                // corruption cannot be erased by later transactions.
                let bumped = state.get("zz").wrapping_add(1);
                state.set("zz", bumped);
            }
            interims.push(state_commitment(&state));
        }
        chunk_secrets.push(trace.finish());
        interim_commitments.push(interims);
    }

    BlockExecutionOutput {
        final_state: state,
        chunks,
        chunk_secrets,
        interim_commitments,
        chunk_start_states,
        per_tx_gas,
    }
}

/// Interim full states of one chunk, honoring a fault spec if the chunk
/// carries one. Index k is the state before the chunk-local transaction k.
fn replay_chunk_states(
    start: &RegisterState,
    txs: &[Transaction],
    fault_after_local: Option<usize>,
) -> Vec<RegisterState> {
    let mut state = start.clone();
    let mut states = vec![state.clone()];
    for (local, tx) in txs.iter().enumerate() {
        for op in &tx.ops {
            apply_op(&mut state, op);
        }
        if fault_after_local == Some(local) {
            let bumped = state.get("zz").wrapping_add(1);
            state.set("zz", bumped);
        }
        states.push(state.clone());
    }
    states
}

/// One generated transaction consuming exactly `target_gas`.
fn generate_transaction(rng: &mut HashRng, target_gas: u64) -> Transaction {
    let mut ops = Vec::new();
    let mut remaining = target_gas;
    let reg = |rng: &mut HashRng| format!("r{:02}", rng.next_below(64));
    while remaining > 0 {
        let choice = rng.next_below(4);
        let op = match choice {
            0 if remaining >= 5 => MachineOp::HashMix(reg(rng)),
            1 if remaining >= 2 => MachineOp::Mul(reg(rng), reg(rng)),
            2 => MachineOp::Add(reg(rng), reg(rng)),
            _ => MachineOp::Set(reg(rng), rng.next_u64() as i64),
        };
        remaining -= op.cost();
        ops.push(op);
    }
    Transaction::new(ops)
}
