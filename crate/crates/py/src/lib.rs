//! Python bindings: the protocol analytics, the deterministic sampling
//! primitives, and the scenario simulator, driven in-process from Python.
//!
//! Scenario configs and run reports cross the boundary as JSON strings;
//! everything else maps to plain Python numbers, lists, and dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sealsim::analytics::{self, McEstimate, MccParams, SafetyParams};
use sealsim::crypto::hash_bytes;
use sealsim::netsim::{self, ScenarioConfig};

fn safety(eta: f64, chunks: u64, honest_verifiers: u64) -> PyResult<SafetyParams> {
    SafetyParams::new(eta, chunks, honest_verifiers)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn mcc_params(
    collectors: u64,
    honest: u64,
    byzantine: u64,
    cluster_size: u64,
    probe_count: u64,
) -> PyResult<MccParams> {
    MccParams::new(collectors, honest, byzantine, cluster_size, probe_count)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn estimate_dict<'py>(py: Python<'py>, estimate: McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("mean", estimate.mean)?;
    dict.set_item("sigma", estimate.sigma)?;
    dict.set_item("trials", estimate.trials)?;
    dict.set_item("successes", estimate.successes)?;
    dict.set_item("interval_3_sigma", estimate.interval_3_sigma())?;
    Ok(dict)
}

/// Chunks each verifier checks: ceil(eta * chunks).
#[pyfunction]
fn chunks_per_verifier(eta: f64, chunks: u64) -> u64 {
    analytics::chunks_per_verifier(eta, chunks)
}

/// Probability that one specific chunk is checked by none of the honest
/// verifiers.
#[pyfunction]
fn p_unchecked_all(eta: f64, chunks: u64, honest_verifiers: u64) -> PyResult<f64> {
    Ok(analytics::p_unchecked_all(&safety(eta, chunks, honest_verifiers)?))
}

/// Same miss probability under sampling with replacement (comparison
/// curve).
#[pyfunction]
fn p_unchecked_with_replacement(eta: f64, chunks: u64, honest_verifiers: u64) -> PyResult<f64> {
    Ok(analytics::p_unchecked_with_replacement(&safety(
        eta,
        chunks,
        honest_verifiers,
    )?))
}

/// Probability that a sealed block carries an unchecked chunk,
/// 1 - (1 - p_unchecked)^chunks.
#[pyfunction]
fn p_error_exact(eta: f64, chunks: u64, honest_verifiers: u64) -> PyResult<f64> {
    Ok(analytics::p_error_exact(&safety(eta, chunks, honest_verifiers)?))
}

/// First-order bound chunks * (1 - eta)^honest.
#[pyfunction]
fn p_error_bound(eta: f64, chunks: u64, honest_verifiers: u64) -> PyResult<f64> {
    Ok(analytics::p_error_bound(&safety(eta, chunks, honest_verifiers)?))
}

/// Minimal per-verifier chunk count whose exponential-form bound clears
/// the target. Returns (chunks_per_verifier, eta).
#[pyfunction]
fn required_eta(target: f64, chunks: u64, honest_verifiers: u64) -> PyResult<(u64, f64)> {
    if !(target > 0.0 && target < 1.0) {
        return Err(PyValueError::new_err("target must be in (0, 1)"));
    }
    analytics::required_eta(target, chunks, honest_verifiers)
        .map(|r| (r.chunks_per_verifier, r.eta))
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Worst-case probability that a missing-collection challenge is accepted.
#[pyfunction]
fn mcc_accept_probability(
    collectors: u64,
    honest: u64,
    byzantine: u64,
    cluster_size: u64,
    probe_count: u64,
) -> PyResult<f64> {
    Ok(analytics::mcc_accept_probability(&mcc_params(
        collectors,
        honest,
        byzantine,
        cluster_size,
        probe_count,
    )?)
    .total)
}

/// Per-cluster-composition breakdown of the acceptance probability, as a
/// list of dicts.
#[pyfunction]
fn mcc_acceptance_breakdown(
    py: Python<'_>,
    collectors: u64,
    honest: u64,
    byzantine: u64,
    cluster_size: u64,
    probe_count: u64,
) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let acceptance = analytics::mcc_accept_probability(&mcc_params(
        collectors,
        honest,
        byzantine,
        cluster_size,
        probe_count,
    )?);
    acceptance
        .by_cluster_count
        .into_iter()
        .map(|term| {
            let dict = PyDict::new(py);
            dict.set_item("byzantine_in_cluster", term.byzantine_in_cluster)?;
            dict.set_item("cluster_probability", term.cluster_probability)?;
            dict.set_item("accept_probability", term.accept_probability)?;
            dict.set_item("worst_byzantine_guarantors", term.worst_byzantine_guarantors)?;
            Ok(dict)
        })
        .collect()
}

/// Monte Carlo estimate of the per-chunk miss probability, using the same
/// sampling code path as the simulator's verifiers.
#[pyfunction]
#[pyo3(signature = (eta, chunks, honest_verifiers, trials, seed=1, jobs=1))]
fn monte_carlo_coverage<'py>(
    py: Python<'py>,
    eta: f64,
    chunks: u64,
    honest_verifiers: u64,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    if trials == 0 {
        return Err(PyValueError::new_err("trials must be at least 1"));
    }
    let params = safety(eta, chunks, honest_verifiers)?;
    let estimate = py.detach(|| {
        analytics::monte_carlo_coverage(&params, trials, hash_bytes(&seed.to_be_bytes()), jobs)
    });
    estimate_dict(py, estimate)
}

/// Monte Carlo estimate of the missing-collection acceptance probability
/// from the full probe-and-attest process.
#[pyfunction]
#[pyo3(signature = (collectors, honest, byzantine, cluster_size, probe_count, trials, seed=1, jobs=1))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo_mcc<'py>(
    py: Python<'py>,
    collectors: u64,
    honest: u64,
    byzantine: u64,
    cluster_size: u64,
    probe_count: u64,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    if trials == 0 {
        return Err(PyValueError::new_err("trials must be at least 1"));
    }
    let params = mcc_params(collectors, honest, byzantine, cluster_size, probe_count)?;
    let estimate = py.detach(|| {
        analytics::monte_carlo_mcc(&params, trials, hash_bytes(&seed.to_be_bytes()), jobs)
    });
    estimate_dict(py, estimate)
}

/// First `n` indices of a seeded Fisher-Yates permutation of 0..length.
/// The seed is hashed, so any integer works.
#[pyfunction]
fn fisher_yates_sample(length: usize, seed: u64, n: usize) -> Vec<u32> {
    sealsim::verifier::fisher_yates_sample(length, hash_bytes(&seed.to_be_bytes()), n)
}

/// Runs a scenario from its JSON config and returns the run report as a
/// JSON string. Identical configs reproduce identical reports.
#[pyfunction]
fn run_scenario(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg =
        ScenarioConfig::from_json(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py
        .detach(|| netsim::run_scenario(cfg))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(serde_json::to_string(&report).unwrap())
}

/// Runs a scenario and returns (report_json, chain_json) with the full
/// finalized block chain.
#[pyfunction]
fn run_scenario_with_chain(py: Python<'_>, config_json: &str) -> PyResult<(String, String)> {
    let cfg =
        ScenarioConfig::from_json(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (report, chain) = py
        .detach(|| netsim::run_scenario_with_chain(cfg))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&chain).unwrap(),
    ))
}

/// Chunk-coverage curve (miss probability with and without replacement)
/// as CSV text.
#[pyfunction]
fn coverage_curve_csv(honest_verifiers: u64, chunks: u64) -> String {
    analytics::coverage_curve_csv(honest_verifiers, chunks)
}

#[pymodule]
fn sealsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(chunks_per_verifier, m)?)?;
    m.add_function(wrap_pyfunction!(p_unchecked_all, m)?)?;
    m.add_function(wrap_pyfunction!(p_unchecked_with_replacement, m)?)?;
    m.add_function(wrap_pyfunction!(p_error_exact, m)?)?;
    m.add_function(wrap_pyfunction!(p_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(required_eta, m)?)?;
    m.add_function(wrap_pyfunction!(mcc_accept_probability, m)?)?;
    m.add_function(wrap_pyfunction!(mcc_acceptance_breakdown, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_mcc, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_yates_sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_with_chain, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_curve_csv, m)?)?;
    Ok(())
}
