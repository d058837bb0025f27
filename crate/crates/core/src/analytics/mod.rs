//! Closed-form evaluation of the protocol's probability model plus Monte
//! Carlo estimators and curve emitters.
//!
//! Everything combinatorial runs in log-gamma space with compensated
//! summation; naive factorials overflow long before the thousand-node
//! configurations these curves cover.

pub mod stats;

use crate::rng::HashRng;
use crate::verifier::{fisher_yates_sample, sample_count};
use serde::{Deserialize, Serialize};
use stats::{binomial_tail, hypergeometric_pmf, ln_choose};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("{0}")]
    Invalid(&'static str),
}

/// Parameters of the chunk-coverage model: sampling fraction, chunk count,
/// and honest verifier count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SafetyParams {
    pub eta: f64,
    pub chunks: u64,
    pub honest_verifiers: u64,
}

impl SafetyParams {
    pub fn new(eta: f64, chunks: u64, honest_verifiers: u64) -> Result<Self, ParamError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ParamError::Invalid("eta must be in (0, 1]"));
        }
        if chunks == 0 {
            return Err(ParamError::Invalid("chunk count must be at least 1"));
        }
        Ok(SafetyParams {
            eta,
            chunks,
            honest_verifiers,
        })
    }

    fn sample_size(&self) -> u64 {
        sample_count(self.eta, self.chunks as usize) as u64
    }
}

/// Parameters of the missing-collection model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MccParams {
    pub collectors: u64,
    pub honest: u64,
    pub byzantine: u64,
    pub cluster_size: u64,
    pub probe_count: u64,
}

impl MccParams {
    pub fn new(
        collectors: u64,
        honest: u64,
        byzantine: u64,
        cluster_size: u64,
        probe_count: u64,
    ) -> Result<Self, ParamError> {
        if honest + byzantine != collectors {
            return Err(ParamError::Invalid("honest + byzantine must equal collectors"));
        }
        if cluster_size == 0 || cluster_size > collectors {
            return Err(ParamError::Invalid("cluster size must be in 1..=collectors"));
        }
        Ok(MccParams {
            collectors,
            honest,
            byzantine,
            cluster_size,
            probe_count,
        })
    }

    /// Guarantors required for a collection: strictly more than 2/3 of the
    /// cluster.
    pub fn guarantor_count(&self) -> u64 {
        2 * (self.cluster_size / 3) + 1
    }
}

/// Chunks one verifier checks: ceil(eta * chunks).
pub fn chunks_per_verifier(eta: f64, chunks: u64) -> u64 {
    sample_count(eta, chunks as usize) as u64
}

/// Probability that one specific chunk is checked by none of the honest
/// verifiers: (1 - n/chunks)^honest, n = ceil(eta * chunks).
pub fn p_unchecked_all(params: &SafetyParams) -> f64 {
    let n = params.sample_size();
    if n >= params.chunks {
        return 0.0;
    }
    if params.honest_verifiers == 0 {
        return 1.0;
    }
    let miss = -(n as f64) / (params.chunks as f64);
    (params.honest_verifiers as f64 * miss.ln_1p()).exp()
}

/// Comparison curve: the same miss probability if each verifier sampled
/// its n chunks with replacement.
pub fn p_unchecked_with_replacement(params: &SafetyParams) -> f64 {
    let n = params.sample_size();
    let draws = n.saturating_mul(params.honest_verifiers);
    if params.chunks == 1 {
        return if draws == 0 { 1.0 } else { 0.0 };
    }
    let miss = -1.0 / params.chunks as f64;
    (draws as f64 * miss.ln_1p()).exp()
}

/// Exact probability (within the per-chunk independence model) that some
/// chunk in the block goes unchecked: 1 - (1 - p_unchecked)^chunks.
pub fn p_error_exact(params: &SafetyParams) -> f64 {
    let pbar = p_unchecked_all(params);
    -(params.chunks as f64 * (-pbar).ln_1p()).exp_m1()
}

/// First-order bound: chunks * (1 - eta)^honest.
pub fn p_error_bound(params: &SafetyParams) -> f64 {
    if params.eta >= 1.0 {
        return 0.0;
    }
    ((params.chunks as f64).ln() + params.honest_verifiers as f64 * (-params.eta).ln_1p()).exp()
}

/// Exponential relaxation of the bound: chunks * exp(-eta * honest).
/// Weaker than [`p_error_bound`] but the form the verifier-load sizing
/// uses, so integer grid scans over it reproduce the published chunk
/// counts.
pub fn p_error_bound_exponential(params: &SafetyParams) -> f64 {
    ((params.chunks as f64).ln() - params.eta * params.honest_verifiers as f64).exp()
}

/// Result of the verifier-load sizing: the minimal chunk count per
/// verifier and the corresponding sampling fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredEta {
    pub chunks_per_verifier: u64,
    pub eta: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RequiredEtaError {
    #[error("target {target} unreachable even at eta = 1 (bound {bound_at_one})")]
    Unachievable { target: f64, bound_at_one: f64 },
}

/// Smallest n on the grid 1..=chunks whose exponential-form error bound
/// clears the target.
pub fn required_eta(
    target: f64,
    chunks: u64,
    honest_verifiers: u64,
) -> Result<RequiredEta, RequiredEtaError> {
    assert!(target > 0.0 && target < 1.0, "target must be in (0, 1)");
    let ln_target = target.ln();
    let ln_chunks = (chunks as f64).ln();
    for n in 1..=chunks {
        let eta = n as f64 / chunks as f64;
        let ln_bound = ln_chunks - eta * honest_verifiers as f64;
        if ln_bound <= ln_target {
            return Ok(RequiredEta {
                chunks_per_verifier: n,
                eta,
            });
        }
    }
    Err(RequiredEtaError::Unachievable {
        target,
        bound_at_one: p_error_bound_exponential(&SafetyParams {
            eta: 1.0,
            chunks,
            honest_verifiers,
        }),
    })
}

/// Per-cluster-composition term of the missing-collection acceptance
/// probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MccClusterTerm {
    pub byzantine_in_cluster: u64,
    pub cluster_probability: f64,
    /// Worst case over the adversary's guarantor split.
    pub accept_probability: f64,
    pub worst_byzantine_guarantors: u64,
}

/// Full evaluation of the missing-collection acceptance probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MccAcceptance {
    pub total: f64,
    pub by_cluster_count: Vec<MccClusterTerm>,
}

/// Worst-case probability that a missing-collection challenge is accepted
/// (the collection cannot be resolved), averaged over random cluster
/// composition.
///
/// Chain of the model: the cluster's Byzantine count is hypergeometric;
/// the adversary picks how many of the required guarantors are Byzantine
/// (maximizing acceptance); an honest collector's probes all land on
/// Byzantine guarantors with probability C(byz_g, k)/C(n_g, k); honest
/// attestations follow a binomial, and acceptance needs the honest count
/// to close the gap the Byzantine attestors leave.
pub fn mcc_accept_probability(params: &MccParams) -> MccAcceptance {
    let n_g = params.guarantor_count();
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut terms = Vec::new();
    for byz_in_cluster in 0..=params.cluster_size {
        let cluster_probability = hypergeometric_pmf(
            params.collectors,
            params.byzantine,
            params.cluster_size,
            byz_in_cluster,
        );
        let (accept, worst) = accept_given_cluster(params, n_g, byz_in_cluster);
        terms.push(MccClusterTerm {
            byzantine_in_cluster: byz_in_cluster,
            cluster_probability,
            accept_probability: accept,
            worst_byzantine_guarantors: worst,
        });
        let contribution = cluster_probability * accept;
        let y = contribution - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    MccAcceptance {
        total: total.clamp(0.0, 1.0),
        by_cluster_count: terms,
    }
}

/// Worst-case acceptance probability given the cluster's Byzantine count,
/// maximized over the number of Byzantine guarantors.
fn accept_given_cluster(params: &MccParams, n_g: u64, byz_in_cluster: u64) -> (f64, u64) {
    let mut best = 0.0f64;
    let mut best_byz_g = 0u64;
    for byz_g in 0..=byz_in_cluster.min(n_g) {
        let p = accept_with_guarantor_split(params, n_g, byz_g);
        if p > best {
            best = p;
            best_byz_g = byz_g;
        }
    }
    (best, best_byz_g)
}

fn accept_with_guarantor_split(params: &MccParams, n_g: u64, byz_g: u64) -> f64 {
    let p_no_answer = probe_failure_probability(n_g, byz_g, params.probe_count);
    // Byzantine non-guarantors all attest; honest attestations must cover
    // the rest of the strict two-thirds threshold.
    let required_honest = params.honest as i64 - params.byzantine as i64 + byz_g as i64;
    binomial_tail(params.honest, p_no_answer, required_honest)
}

/// Probability that a probing collector receives no answer: all of its
/// min(probe_count, n_g) distinct probes land on Byzantine guarantors.
pub fn probe_failure_probability(n_g: u64, byz_g: u64, probe_count: u64) -> f64 {
    let k = probe_count.min(n_g);
    if k == 0 {
        return 1.0; // nobody probes, nobody answers
    }
    (ln_choose(byz_g, k as i64) - ln_choose(n_g, k as i64)).exp()
}

/// Monte Carlo estimate with a normal-approximation three-sigma interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub sigma: f64,
    pub trials: u64,
    pub successes: u64,
}

impl McEstimate {
    fn from_counts(successes: u64, trials: u64) -> Self {
        let mean = successes as f64 / trials as f64;
        let sigma = (mean * (1.0 - mean) / trials as f64).sqrt();
        McEstimate {
            mean,
            sigma,
            trials,
            successes,
        }
    }

    pub fn interval_3_sigma(&self) -> (f64, f64) {
        (self.mean - 3.0 * self.sigma, self.mean + 3.0 * self.sigma)
    }

    /// True iff `value` lies within three sigmas of the estimate (with a
    /// floor on sigma so a zero-variance estimate still admits equality).
    pub fn consistent_with(&self, value: f64) -> bool {
        let tolerance = (3.0 * self.sigma).max(1e-12);
        (self.mean - value).abs() <= tolerance
    }
}

/// Splits `trials` over `jobs` workers. Per-trial seeds derive from the
/// trial index alone, so the estimate is identical for any job count.
fn run_trials<F>(trials: u64, jobs: usize, trial_fn: F) -> u64
where
    F: Fn(u64) -> bool + Sync,
{
    let jobs = jobs.max(1).min(trials.max(1) as usize);
    if jobs == 1 {
        return (0..trials).filter(|&t| trial_fn(t)).count() as u64;
    }
    let chunk = trials.div_ceil(jobs as u64);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for j in 0..jobs as u64 {
            let lo = j * chunk;
            let hi = ((j + 1) * chunk).min(trials);
            let f = &trial_fn;
            handles.push(scope.spawn(move || (lo..hi).filter(|&t| f(t)).count() as u64));
        }
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    })
}

/// Estimates the probability that a fixed chunk goes unchecked by every
/// honest verifier, using the same Fisher-Yates sampling path the
/// simulator's verifiers use.
pub fn monte_carlo_coverage(
    params: &SafetyParams,
    trials: u64,
    seed: crate::crypto::HashValue,
    jobs: usize,
) -> McEstimate {
    assert!(trials >= 1);
    let n = params.sample_size() as usize;
    let chunks = params.chunks as usize;
    let honest = params.honest_verifiers;
    let successes = run_trials(trials, jobs, |t| {
        let trial_seed = HashRng::derive_seed(seed, "coverage-trial", t);
        for v in 0..honest {
            let vseed = HashRng::derive_seed(trial_seed, "verifier", v);
            if fisher_yates_sample(chunks, vseed, n).contains(&0) {
                return false;
            }
        }
        true
    });
    McEstimate::from_counts(successes, trials)
}

/// Simulates the full missing-collection process per trial: a random
/// cluster composition, the adversary's worst-case guarantor split, every
/// honest collector probing its plan, and the attestation threshold.
pub fn monte_carlo_mcc(
    params: &MccParams,
    trials: u64,
    seed: crate::crypto::HashValue,
    jobs: usize,
) -> McEstimate {
    assert!(trials >= 1);
    let n_g = params.guarantor_count();
    // The adversary's split decision per cluster composition, shared with
    // the closed form.
    let worst_split: Vec<u64> = (0..=params.cluster_size)
        .map(|byz| accept_given_cluster(params, n_g, byz).1)
        .collect();

    let successes = run_trials(trials, jobs, |t| {
        let trial_seed = HashRng::derive_seed(seed, "mcc-trial", t);
        // Draw the cluster without replacement; collectors 0..byzantine
        // are the Byzantine ones.
        let cluster = fisher_yates_sample(
            params.collectors as usize,
            HashRng::derive_seed(trial_seed, "cluster", 0),
            params.cluster_size as usize,
        );
        let byz_in_cluster = cluster
            .iter()
            .filter(|&&c| (c as u64) < params.byzantine)
            .count() as u64;
        let byz_g = worst_split[byz_in_cluster as usize];
        let k = params.probe_count.min(n_g) as usize;

        // Honest collectors probe; unanswered probes become attestations.
        let mut honest_attestations = 0u64;
        for v in 0..params.honest {
            if k == 0 {
                honest_attestations += 1;
                continue;
            }
            let probes = fisher_yates_sample(
                n_g as usize,
                HashRng::derive_seed(trial_seed, "probe", v),
                k,
            );
            if probes.iter().all(|&g| (g as u64) < byz_g) {
                honest_attestations += 1;
            }
        }
        let required = params.honest as i64 - params.byzantine as i64 + byz_g as i64;
        honest_attestations as i64 >= required
    });
    McEstimate::from_counts(successes, trials)
}

/// Chunk-coverage curve data: the miss probability with and without
/// replacement over a sampling-fraction grid.
pub fn coverage_curve_csv(honest_verifiers: u64, chunks: u64) -> String {
    let mut out = String::from("eta,p_unchecked_fisher_yates,p_unchecked_with_replacement\n");
    for i in 1..=100u32 {
        let eta = i as f64 / 1000.0;
        let params = SafetyParams {
            eta,
            chunks,
            honest_verifiers,
        };
        out.push_str(&format!(
            "{:.3},{:.15e},{:.15e}\n",
            eta,
            p_unchecked_all(&params),
            p_unchecked_with_replacement(&params)
        ));
    }
    out
}

/// Missing-collection acceptance sweeps. The model text never names the
/// swept variable, so both cluster size and probe count are emitted with
/// explicit column labels.
pub struct MccCurves {
    pub cluster_size_sweep: String,
    pub probe_count_sweep: String,
}

pub fn mcc_curves_csv(collectors: u64, honest: u64, byzantine: u64) -> MccCurves {
    let mut cluster = String::from("cluster_size,probe_count,p_mcc_accepted\n");
    for cluster_size in (3..=60).step_by(3) {
        let params = MccParams::new(collectors, honest, byzantine, cluster_size, 3).unwrap();
        cluster.push_str(&format!(
            "{},{},{:.15e}\n",
            cluster_size,
            3,
            mcc_accept_probability(&params).total
        ));
    }
    let mut probes = String::from("cluster_size,probe_count,p_mcc_accepted\n");
    for probe_count in 0..=10u64 {
        let params = MccParams::new(collectors, honest, byzantine, 30, probe_count).unwrap();
        probes.push_str(&format!(
            "{},{},{:.15e}\n",
            30,
            probe_count,
            mcc_accept_probability(&params).total
        ));
    }
    MccCurves {
        cluster_size_sweep: cluster,
        probe_count_sweep: probes,
    }
}
