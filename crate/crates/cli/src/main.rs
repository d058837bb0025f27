//! Batch command-line front end: run scenarios, evaluate the protocol
//! analytics, and emit figure data. Exit codes: 0 on success, 1 when a
//! scenario violates its fixture expectations, 2 on configuration or
//! parameter errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use sealsim::analytics::{
    self, mcc_accept_probability, monte_carlo_coverage, monte_carlo_mcc, p_error_bound,
    p_error_bound_exponential, p_error_exact, p_unchecked_all, required_eta, MccParams,
    RequiredEtaError, SafetyParams,
};
use sealsim::codec::Canonical;
use sealsim::crypto::hash_bytes;
use sealsim::netsim::{run_scenario_with_chain, scenario_workload, ScenarioConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_EXPECTATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sealsim",
    about = "Deterministic simulator and analytics for a pipelined execute-then-verify blockchain protocol",
    version
)]
struct Cli {
    /// Output directory; defaults to $SEALSIM_OUT or the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo estimators.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output format for analytics values.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its run report and chain dump.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form protocol analytics.
    Analytics {
        #[command(subcommand)]
        query: AnalyticsQuery,
    },
    /// Emit the figure-data CSV files.
    EmitCurves(EmitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to a scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the generated transaction workload as fixture files.
    #[arg(long, default_value_t = false)]
    dump_workload: bool,
}

#[derive(Subcommand)]
enum AnalyticsQuery {
    /// Probability that a sealed block carries a computational error.
    PError {
        #[arg(long)]
        eta: f64,
        /// Chunks per block.
        #[arg(long)]
        xi: u64,
        /// Honest verifier count.
        #[arg(long)]
        honest: u64,
        /// Cross-check with a Monte Carlo estimate of this many trials.
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Worst-case probability that a missing-collection challenge is
    /// accepted (the collection cannot be resolved).
    Mcc {
        #[arg(long)]
        collectors: u64,
        #[arg(long)]
        honest: u64,
        #[arg(long)]
        byzantine: u64,
        #[arg(long)]
        cluster: u64,
        /// Guarantors each collector probes.
        #[arg(long)]
        kappa: u64,
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the per-cluster-composition breakdown.
        #[arg(long, default_value_t = false)]
        breakdown: bool,
    },
    /// Minimal per-verifier chunk count meeting an error target.
    RequiredEta {
        #[arg(long)]
        target: f64,
        #[arg(long)]
        xi: u64,
        #[arg(long)]
        honest: u64,
    },
}

#[derive(Args)]
struct EmitArgs {
    /// Which figure's data to emit.
    #[arg(long, value_enum)]
    figure: Figure,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Per-chunk miss probability over the sampling fraction
    /// (1000 chunks, 667 honest verifiers).
    Fig4,
    /// Missing-collection acceptance sweeps
    /// (1000 collectors, 667 honest, 333 byzantine).
    Fig6,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("SEALSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match run(cli, &out_dir) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: Cli, out_dir: &Path) -> Result<ExitCode, String> {
    match cli.command {
        Command::Simulate(args) => simulate(args, out_dir),
        Command::Analytics { query } => {
            analytics_cmd(query, cli.format, cli.jobs, out_dir).map(|_| ExitCode::SUCCESS)
        }
        Command::EmitCurves(args) => emit_curves(args, out_dir).map(|_| ExitCode::SUCCESS),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(args: SimulateArgs, out_dir: &Path) -> Result<ExitCode, String> {
    let json = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut cfg = ScenarioConfig::from_json(&json).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    ensure_dir(out_dir)?;

    if args.dump_workload {
        let workload = scenario_workload(&cfg);
        let flat: Vec<_> = workload.into_iter().flatten().collect();
        let mut binary = Vec::new();
        flat.write(&mut binary);
        write_file(&out_dir.join("workload.bin"), &binary)?;
        write_file(
            &out_dir.join("workload.json"),
            serde_json::to_string_pretty(&flat).unwrap().as_bytes(),
        )?;
    }

    let (report, chain) = run_scenario_with_chain(cfg.clone()).map_err(|e| e.to_string())?;

    write_file(
        &out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    write_file(
        &out_dir.join("chain.json"),
        serde_json::to_string_pretty(&chain).unwrap().as_bytes(),
    )?;
    let mut chain_bin = Vec::new();
    chain.write(&mut chain_bin);
    write_file(&out_dir.join("chain.bin"), &chain_bin)?;

    println!("master seed      {}", report.master_seed);
    println!(
        "blocks sealed    {}/{} payload ({} rounds, max seal lag {})",
        report.sealed_payload_blocks, report.payload_blocks, report.rounds, report.max_seal_lag
    );
    println!(
        "faults           {} injected, {} detected, {} sealed",
        report.faults.len(),
        report.faults.iter().filter(|f| f.detected).count(),
        report.faults.iter().filter(|f| f.sealed).count()
    );
    println!("slashing events  {}", report.slashings.len());
    println!("challenges       {}", report.challenge_outcomes.len());
    if report.stalled {
        println!("RUN STALLED before sealing every payload block");
    }
    for failure in &report.expectation_failures {
        println!("expectation violated: {failure}");
    }
    if report.expectation_failures.is_empty() && !report.stalled {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_EXPECTATION))
    }
}

fn analytics_cmd(
    query: AnalyticsQuery,
    format: Format,
    jobs: usize,
    out_dir: &Path,
) -> Result<(), String> {
    match query {
        AnalyticsQuery::PError {
            eta,
            xi,
            honest,
            mc_trials,
            seed,
        } => {
            let params = SafetyParams::new(eta, xi, honest).map_err(|e| e.to_string())?;
            let exact = p_error_exact(&params);
            let bound = p_error_bound(&params);
            let bound_exp = p_error_bound_exponential(&params);
            let unchecked = p_unchecked_all(&params);
            let mc = mc_trials.map(|trials| {
                monte_carlo_coverage(&params, trials, hash_bytes(&seed.to_be_bytes()), jobs)
            });
            match format {
                Format::Json => {
                    let mut value = serde_json::json!({
                        "eta": eta,
                        "chunks": xi,
                        "honest_verifiers": honest,
                        "p_unchecked_one_chunk": unchecked,
                        "p_error_exact": exact,
                        "p_error_bound": bound,
                        "p_error_bound_exponential": bound_exp,
                    });
                    if let Some(mc) = mc {
                        value["monte_carlo_unchecked"] = serde_json::json!({
                            "mean": mc.mean,
                            "trials": mc.trials,
                            "interval_3_sigma": mc.interval_3_sigma(),
                        });
                    }
                    println!("{}", serde_json::to_string_pretty(&value).unwrap());
                }
                Format::Csv => {
                    println!("eta,chunks,honest,p_unchecked,p_error_exact,p_error_bound,p_error_bound_exponential");
                    println!("{eta},{xi},{honest},{unchecked:e},{exact:e},{bound:e},{bound_exp:e}");
                    if let Some(mc) = mc {
                        println!("mc_mean,mc_trials,mc_lo,mc_hi");
                        let (lo, hi) = mc.interval_3_sigma();
                        println!("{},{},{lo:e},{hi:e}", mc.mean, mc.trials);
                    }
                }
            }
        }
        AnalyticsQuery::Mcc {
            collectors,
            honest,
            byzantine,
            cluster,
            kappa,
            mc_trials,
            seed,
            breakdown,
        } => {
            let params = MccParams::new(collectors, honest, byzantine, cluster, kappa)
                .map_err(|e| e.to_string())?;
            let acceptance = mcc_accept_probability(&params);
            let mc = mc_trials.map(|trials| {
                monte_carlo_mcc(&params, trials, hash_bytes(&seed.to_be_bytes()), jobs)
            });
            match format {
                Format::Json => {
                    let mut value = serde_json::json!({
                        "collectors": collectors,
                        "honest": honest,
                        "byzantine": byzantine,
                        "cluster_size": cluster,
                        "probe_count": kappa,
                        "p_mcc_accepted": acceptance.total,
                    });
                    if breakdown {
                        value["by_cluster_count"] =
                            serde_json::to_value(&acceptance.by_cluster_count).unwrap();
                    }
                    if let Some(mc) = mc {
                        value["monte_carlo"] = serde_json::json!({
                            "mean": mc.mean,
                            "trials": mc.trials,
                            "interval_3_sigma": mc.interval_3_sigma(),
                        });
                    }
                    println!("{}", serde_json::to_string_pretty(&value).unwrap());
                }
                Format::Csv => {
                    println!("collectors,honest,byzantine,cluster_size,probe_count,p_mcc_accepted");
                    println!(
                        "{collectors},{honest},{byzantine},{cluster},{kappa},{:e}",
                        acceptance.total
                    );
                    if breakdown {
                        println!("byzantine_in_cluster,cluster_probability,accept_probability,worst_byzantine_guarantors");
                        for term in &acceptance.by_cluster_count {
                            println!(
                                "{},{:e},{:e},{}",
                                term.byzantine_in_cluster,
                                term.cluster_probability,
                                term.accept_probability,
                                term.worst_byzantine_guarantors
                            );
                        }
                    }
                    if let Some(mc) = mc {
                        let (lo, hi) = mc.interval_3_sigma();
                        println!("mc_mean,mc_trials,mc_lo,mc_hi");
                        println!("{},{},{lo:e},{hi:e}", mc.mean, mc.trials);
                    }
                }
            }
        }
        AnalyticsQuery::RequiredEta { target, xi, honest } => {
            if !(target > 0.0 && target < 1.0) {
                return Err(format!("target {target} must be in (0, 1)"));
            }
            match required_eta(target, xi, honest) {
                Ok(r) => match format {
                    Format::Json => println!(
                        "{}",
                        serde_json::to_string_pretty(&serde_json::json!({
                            "target": target,
                            "chunks": xi,
                            "honest_verifiers": honest,
                            "chunks_per_verifier": r.chunks_per_verifier,
                            "eta": r.eta,
                        }))
                        .unwrap()
                    ),
                    Format::Csv => {
                        println!("target,chunks,honest,chunks_per_verifier,eta");
                        println!("{target:e},{xi},{honest},{},{}", r.chunks_per_verifier, r.eta);
                    }
                },
                Err(RequiredEtaError::Unachievable { target, bound_at_one }) => {
                    return Err(format!(
                        "target {target:e} unreachable even at eta = 1 (bound {bound_at_one:e})"
                    ));
                }
            }
        }
    }
    let _ = out_dir;
    Ok(())
}

fn emit_curves(args: EmitArgs, out_dir: &Path) -> Result<(), String> {
    ensure_dir(out_dir)?;
    match args.figure {
        Figure::Fig4 => {
            let csv = analytics::coverage_curve_csv(667, 1000);
            write_file(&out_dir.join("fig4_chunk_coverage.csv"), csv.as_bytes())?;
        }
        Figure::Fig6 => {
            let curves = analytics::mcc_curves_csv(1000, 667, 333);
            write_file(
                &out_dir.join("fig6_mcc_cluster_size_sweep.csv"),
                curves.cluster_size_sweep.as_bytes(),
            )?;
            write_file(
                &out_dir.join("fig6_mcc_probe_count_sweep.csv"),
                curves.probe_count_sweep.as_bytes(),
            )?;
        }
    }
    Ok(())
}
