//! Adversary-strategy scenarios: each strategy produces its intended
//! protocol response and never harms liveness while honest
//! supermajorities hold.

use sealsim::netsim::*;

fn base(seed: u64) -> ScenarioConfig {
    serde_json::from_value(serde_json::json!({
        "master_seed": seed,
        "collectors": 12, "consensus": 3, "executors": 3, "verifiers": 10,
        "cluster_size": 4, "eta": 0.15,
        "gas_tx_limit": 10, "gas_chunk_limit": 40,
        "blocks": 3, "collections_per_block": 10, "collection_size": 8, "tx_gas": 10
    })).unwrap()
}

#[test]
fn faulty_executor_scenario_works() {
    let mut cfg = base(42);
    cfg.adversaries.push(AdversaryAssignment {
        role: sealsim::Role::Execution, index: 0,
        strategy: AdversaryStrategy::FaultyExecutor { respond_to_challenges: true, target_colluders: false },
    });
    let report = run_scenario(cfg).unwrap();
    eprintln!("faults: {:?}", report.faults);
    eprintln!("sealed: {}/{} stalled={} rounds={}", report.sealed_payload_blocks, report.payload_blocks, report.stalled, report.rounds);
    eprintln!("slashings: {:?}", report.slashings);
    eprintln!("outcomes: {:?}", report.challenge_outcomes);
    eprintln!("coverage entries: {}", report.honest_coverage.len());
    assert!(report.all_payload_sealed);
    assert_eq!(report.faults.len(), 3);
    for f in &report.faults {
        if f.detected { assert!(f.executor_slashed && !f.sealed); }
    }
    assert!(!report.honest_node_slashed);
}

#[test]
fn spurious_challenger_scenario_works() {
    let mut cfg = base(43);
    cfg.eta = 0.3;
    cfg.collections_per_block = 3;
    cfg.adversaries.push(AdversaryAssignment {
        role: sealsim::Role::Verification, index: 9,
        strategy: AdversaryStrategy::SpuriousChallenger,
    });
    let report = run_scenario(cfg).unwrap();
    eprintln!("sealed: {}/{} slashings: {:?}", report.sealed_payload_blocks, report.payload_blocks, report.slashings);
    eprintln!("outcomes: {:?}", report.challenge_outcomes);
    assert!(report.all_payload_sealed);
    assert!(report.slashings.iter().all(|s| s.role == sealsim::Role::Verification && s.index == 9));
    assert!(!report.slashings.is_empty());
    assert!(!report.honest_node_slashed);
}

#[test]
fn withholding_cluster_scenario_works() {
    let mut cfg = base(44);
    cfg.collections_per_block = 3;
    cfg.withholding_clusters = 1;
    cfg.eta = 0.3;
    let report = run_scenario(cfg).unwrap();
    eprintln!("mcc: {:?}", report.mcc);
    eprintln!("sealed: {}/{} stalled={}", report.sealed_payload_blocks, report.payload_blocks, report.stalled);
    eprintln!("fates: {:?}", report.collection_fates.iter().filter(|(_, f)| *f == CollectionFate::Skipped).count());
    eprintln!("slashings: {}", report.slashings.len());
    assert!(report.all_payload_sealed, "stalled={}", report.stalled);
    assert!(!report.mcc.is_empty());
    assert!(report.mcc.iter().all(|m| m.cluster_slashed));
}

#[test]
fn lazy_verifier_rejected() {
    let mut cfg = base(45);
    cfg.collections_per_block = 3;
    cfg.eta = 0.3;
    cfg.verifiers = 10;
    cfg.adversaries.push(AdversaryAssignment {
        role: sealsim::Role::Verification, index: 3,
        strategy: AdversaryStrategy::LazyVerifier,
    });
    let report = run_scenario(cfg).unwrap();
    eprintln!("rejected: {:?}", report.rejected_approvals);
    assert!(report.all_payload_sealed);
    assert!(report.rejected_approvals.iter().any(|(r, i, c)| *r == sealsim::Role::Verification && *i == 3 && *c > 0));
}

#[test]
fn colluding_verifiers_scenario_works() {
    let mut cfg = base(46);
    cfg.verifiers = 13;
    cfg.adversaries.push(AdversaryAssignment {
        role: sealsim::Role::Execution, index: 0,
        strategy: AdversaryStrategy::FaultyExecutor { respond_to_challenges: true, target_colluders: true },
    });
    for i in 10..13 {
        cfg.adversaries.push(AdversaryAssignment {
            role: sealsim::Role::Verification, index: i,
            strategy: AdversaryStrategy::ColludingVerifier { partner_executor: 0 },
        });
    }
    let report = run_scenario(cfg).unwrap();
    eprintln!("sealed {}/{} faults {:?}", report.sealed_payload_blocks, report.payload_blocks, report.faults);
    assert!(report.all_payload_sealed);
    assert_eq!(report.honest_coverage.iter().map(|c| c.counts.iter().map(|&x| x as u64).sum::<u64>()).sum::<u64>() > 0, true);
}

#[test]
fn timeout_executor_slashed() {
    let mut cfg = base(47);
    cfg.eta = 1.0;
    cfg.collections_per_block = 3;
    cfg.executors = 2;
    cfg.blocks = 2;
    cfg.adversaries.push(AdversaryAssignment {
        role: sealsim::Role::Execution, index: 0,
        strategy: AdversaryStrategy::FaultyExecutor { respond_to_challenges: false, target_colluders: false },
    });
    let report = run_scenario(cfg).unwrap();
    eprintln!("sealed {}/{} slashings {:?}", report.sealed_payload_blocks, report.payload_blocks, report.slashings);
    assert!(report.all_payload_sealed);
    assert!(report.slashings.iter().any(|s| s.reason == sealsim::messages::SlashReason::ChallengeTimeout));
    assert!(report.faults.iter().all(|f| f.detected && !f.sealed));
}

#[test]
fn single_honest_guarantor_resolves_the_collection() {
    // One cluster of 12 with eleven withholding members: the lone honest
    // guarantor serves the text, so execution proceeds with no challenge
    // and nobody is slashed.
    let mut cfg = base(48);
    cfg.cluster_size = 12;
    cfg.collections_per_block = 2;
    cfg.eta = 0.3;
    cfg.blocks = 2;
    for i in 1..12 {
        cfg.adversaries.push(AdversaryAssignment {
            role: sealsim::Role::Collector,
            index: i,
            strategy: AdversaryStrategy::WithholdingCluster,
        });
    }
    let report = run_scenario(cfg).unwrap();
    assert!(report.all_payload_sealed, "stalled={}", report.stalled);
    assert!(report.mcc.is_empty(), "no challenge should be needed: {:?}", report.mcc);
    assert!(report.slashings.is_empty());
    assert!(report
        .collection_fates
        .iter()
        .all(|(_, fate)| *fate == CollectionFate::Executed));
}

#[test]
fn clean_runs_report_no_missing_data() {
    let report = run_scenario(base(49)).unwrap();
    assert_eq!(report.data_unavailable_events, 0);
    assert!(report.all_payload_sealed);
}
