#!/usr/bin/env python3
"""Smoke test for the sealsim_py extension module.

Locates the cdylib built by cargo (release preferred), imports it under
the proper module name, and drives the analytics and a small simulation
end to end. Build the module first:

    cargo build -p sealsim-py            # or --release

then run:

    python3 python/smoke_test.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / "release" / "libsealsim_py.so",
        REPO / "target" / "debug" / "libsealsim_py.so",
        REPO / "target" / "release" / "sealsim_py.dll",
        REPO / "target" / "debug" / "sealsim_py.dll",
        REPO / "target" / "release" / "libsealsim_py.dylib",
        REPO / "target" / "debug" / "libsealsim_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p sealsim-py")
    stage = Path(tempfile.mkdtemp(prefix="sealsim-py-"))
    suffix = ".so" if built.suffix != ".dll" else ".pyd"
    shutil.copy2(built, stage / f"sealsim_py{suffix}")
    sys.path.insert(0, str(stage))
    import sealsim_py

    return sealsim_py


def approx(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main():
    m = import_module()
    print(f"sealsim_py {m.__version__}")

    # Verifier-load sizing at the full-scale operating points.
    assert m.chunks_per_verifier(0.042, 1000) == 42
    n, eta = m.required_eta(1e-6, 1000, 667)
    assert n == 32 and approx(eta, 0.032), (n, eta)
    n, eta = m.required_eta(1e-9, 1000, 667)
    assert n == 42 and approx(eta, 0.042), (n, eta)
    assert m.p_error_bound(0.032, 1000, 667) <= 1e-6
    assert m.p_error_bound(0.042, 1000, 667) <= 1e-9
    print("verifier-load sizing ok (32 / 42 chunks)")

    # Coverage law and its Monte Carlo cross-check.
    p = m.p_unchecked_all(0.25, 4, 2)
    assert approx(p, 0.5625), p
    assert m.p_unchecked_with_replacement(0.25, 4, 2) >= p
    est = m.monte_carlo_coverage(0.1, 50, 20, 20000, seed=7)
    lo, hi = est["interval_3_sigma"]
    analytic = m.p_unchecked_all(0.1, 50, 20)
    assert lo <= analytic <= hi, (est, analytic)
    print(f"coverage law ok (mc {est['mean']:.4f} vs analytic {analytic:.4f})")

    # Missing-collection model.
    assert m.mcc_accept_probability(30, 30, 0, 6, 2) == 0.0
    p_mcc = m.mcc_accept_probability(30, 21, 9, 6, 2)
    assert 0.0 < p_mcc < 1.0
    breakdown = m.mcc_acceptance_breakdown(30, 21, 9, 6, 2)
    assert len(breakdown) == 7
    est = m.monte_carlo_mcc(30, 21, 9, 6, 2, 20000, seed=11)
    lo, hi = est["interval_3_sigma"]
    assert lo <= p_mcc <= hi, (est, p_mcc)
    print(f"missing-collection model ok (p={p_mcc:.5f})")

    # Deterministic sampling primitive.
    sample = m.fisher_yates_sample(10, 99, 4)
    assert sample == m.fisher_yates_sample(10, 99, 4)
    assert len(set(sample)) == 4 and all(0 <= i < 10 for i in sample)

    # A small honest scenario sealed end to end, reproducibly.
    config = {
        "master_seed": 12345,
        "collectors": 12,
        "consensus": 3,
        "executors": 3,
        "verifiers": 10,
        "cluster_size": 4,
        "eta": 0.34,
        "blocks": 3,
        "collections_per_block": 3,
        "collection_size": 8,
        "tx_gas": 10,
    }
    report = json.loads(m.run_scenario(json.dumps(config)))
    assert report["all_payload_sealed"], report
    assert report["slashings"] == []
    again = json.loads(m.run_scenario(json.dumps(config)))
    assert report == again, "same seed must reproduce the same report"
    report2, chain = m.run_scenario_with_chain(json.dumps(config))
    blocks = json.loads(chain)
    assert blocks[0]["height"] == 0 and len(blocks) >= 4
    print(f"simulation ok ({report['sealed_payload_blocks']}/{report['payload_blocks']} sealed, "
          f"{report['events_processed']} events)")

    # A faulty executor is caught and slashed.
    bad = dict(config)
    bad.update({
        "eta": 0.5,
        "master_seed": 777,
        "adversaries": [
            {"role": "execution", "index": 0,
             "strategy": {"kind": "faulty_executor"}}
        ],
    })
    report = json.loads(m.run_scenario(json.dumps(bad)))
    assert report["all_payload_sealed"], report
    detected = [f for f in report["faults"] if f["detected"]]
    assert detected, report["faults"]
    assert all(f["executor_slashed"] and not f["sealed"] for f in detected)
    assert not report["honest_node_slashed"]
    print(f"adjudication ok ({len(detected)}/{len(report['faults'])} faults detected and slashed)")

    # Curve emitter returns parseable CSV.
    csv = m.coverage_curve_csv(667, 1000)
    rows = csv.strip().splitlines()
    assert rows[0].startswith("eta,") and len(rows) == 101

    print("smoke test PASSED")


if __name__ == "__main__":
    main()
