//! `ws-sim`: single runs, parameter sweeps, bound queries and
//! potential-contraction probes for the latency work-stealing model.
//!
//! Every command is pure given its flags: identical invocations write
//! identical bytes. Floats print with 6 significant digits. Exit codes:
//! 0 ok, 2 validation error, 3 budget exceeded.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ws_sim_core::analysis::{self, AnalysisError};
use ws_sim_core::engine::{
    run, run_reference_with_snapshot, RunOptions, Snapshot,
};
use ws_sim_core::experiments::{
    run_row, run_sweep, write_runs_csv, ExperimentError, SweepOptions, SweepSpec,
};
use ws_sim_core::format::sig6;
use ws_sim_core::model::{EngineKind, OverheadLogArg, RunTrace, SimConfig, StealOutcome};

#[derive(Parser)]
#[command(
    name = "ws-sim",
    about = "Randomized work stealing with communication latency: simulator, bounds, experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and print its result row (sweep CSV schema).
    Run(RunArgs),
    /// Run a replicated parameter sweep from a grid file.
    Sweep(SweepArgs),
    /// Print γ(p) and the analytic cap.
    Gamma(GammaArgs),
    /// Print the makespan and request bounds for one (W, p, λ).
    Bound(BoundArgs),
    /// Probe the one-interval potential contraction on a frozen state.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Reference,
    Event,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Reference => EngineKind::Reference,
            EngineArg::Event => EngineKind::Event,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OverheadFormArg {
    #[value(name = "W_over_lambda")]
    WOverLambda,
    #[value(name = "W_over_2lambda")]
    WOver2Lambda,
}

impl From<OverheadFormArg> for OverheadLogArg {
    fn from(f: OverheadFormArg) -> Self {
        match f {
            OverheadFormArg::WOverLambda => OverheadLogArg::WOverLambda,
            OverheadFormArg::WOver2Lambda => OverheadLogArg::WOver2Lambda,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Total work in unit tasks.
    #[arg(long = "W")]
    total_work: Option<u64>,
    /// Processor count.
    #[arg(long)]
    p: Option<u32>,
    /// One-way communication latency in ticks.
    #[arg(long)]
    lambda: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// JSON config file mirroring the run parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write one CSV record per steal event (t,victim,thief,outcome,amount).
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
    /// Write the potential series as CSV (k,phi,r_k).
    #[arg(long = "series-out")]
    series_out: Option<PathBuf>,
    /// Freeze the full engine state at interval boundary K (forces the
    /// reference engine).
    #[arg(long = "snapshot-at", value_name = "K")]
    snapshot_at: Option<u64>,
    /// Where the snapshot JSON goes; required with --snapshot-at.
    #[arg(long = "snapshot-out")]
    snapshot_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid file: {"W_values": [...], "p_values": [...],
    /// "lambda_values": [...], "replications": n, "base_seed": n}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Log argument of the overhead-ratio numerator.
    #[arg(long = "overhead-form", value_enum)]
    overhead_form: Option<OverheadFormArg>,
    /// Budget: refuse grids with more runs than this.
    #[arg(long = "max-runs")]
    max_runs: Option<u64>,
    /// Per-run CSV output path.
    #[arg(long = "out-csv")]
    out_csv: Option<PathBuf>,
    /// Summary JSON output path (cells + fitted constant).
    #[arg(long = "out-json")]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long)]
    p: u32,
    /// Print the whole range p..=p-max.
    #[arg(long = "p-max")]
    p_max: Option<u32>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long = "W")]
    total_work: u64,
    #[arg(long)]
    p: u32,
    #[arg(long)]
    lambda: u64,
    /// Also evaluate both tail forms at slack x.
    #[arg(long)]
    x: Option<f64>,
    /// Write the full bound report as JSON.
    #[arg(long = "out-json")]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Snapshot JSON produced by `run --snapshot-at`.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value_t = 1000)]
    ensemble: u32,
}

enum CliError {
    Validation(String),
    Budget(String),
    Io(String),
}

impl CliError {
    fn io(context: &str, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gamma(args) => cmd_gamma(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Probe(args) => cmd_probe(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_run_config(args: &RunArgs) -> Result<SimConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::io("opening --config", e))?;
            serde_json::from_reader::<_, SimConfig>(file)
                .map_err(|e| CliError::Validation(format!("--config: {e}")))?
        }
        None => {
            let total_work = args
                .total_work
                .ok_or_else(|| CliError::Validation("missing required flag --W".into()))?;
            let p = args
                .p
                .ok_or_else(|| CliError::Validation("missing required flag --p".into()))?;
            let lambda = args
                .lambda
                .ok_or_else(|| CliError::Validation("missing required flag --lambda".into()))?;
            let seed = args
                .seed
                .ok_or_else(|| CliError::Validation("missing required flag --seed".into()))?;
            SimConfig::new(total_work, p, lambda, seed)
        }
    };
    if let Some(w) = args.total_work {
        config.total_work = w;
    }
    if let Some(p) = args.p {
        config.processors = p;
    }
    if let Some(lambda) = args.lambda {
        config.latency = lambda;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(engine) = args.engine {
        config.engine = engine.into();
    }
    config
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = resolve_run_config(&args)?;
    if args.snapshot_at.is_some() && args.snapshot_out.is_none() {
        return Err(CliError::Validation(
            "--snapshot-at requires --snapshot-out".into(),
        ));
    }
    let opts = RunOptions {
        record_series: args.series_out.is_some(),
        record_steal_events: args.trace_out.is_some(),
    };
    let trace = match args.snapshot_at {
        Some(k) => {
            let (trace, snapshot) = run_reference_with_snapshot(&config, &opts, k);
            let snapshot = snapshot.ok_or_else(|| {
                CliError::Validation(format!(
                    "snapshot boundary k={k} (t={}) not reached: makespan is {}",
                    k * config.latency,
                    trace.makespan
                ))
            })?;
            let path = args.snapshot_out.as_ref().unwrap();
            write_json(path, &snapshot)?;
            trace
        }
        None => run(&config, &opts),
    };

    if let Some(path) = &args.trace_out {
        write_steal_trace(path, &trace)?;
    }
    if let Some(path) = &args.series_out {
        write_series(path, &trace)?;
    }

    let row = run_row(&config, &trace);
    let mut out = Vec::new();
    write_runs_csv(&mut out, std::slice::from_ref(&row))
        .map_err(|e| CliError::io("writing stdout", e))?;
    print!("{}", String::from_utf8(out).expect("csv is utf-8"));
    Ok(())
}

fn write_steal_trace(path: &PathBuf, trace: &RunTrace) -> Result<(), CliError> {
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| CliError::io("creating --trace-out", e))?,
    );
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "t,victim,thief,outcome,amount")?;
        for ev in &trace.steal_events {
            let outcome = match ev.outcome {
                StealOutcome::Success => "success",
                StealOutcome::Fail => "fail",
            };
            writeln!(out, "{},{},{},{},{}", ev.t, ev.victim, ev.thief, outcome, ev.amount)?;
        }
        Ok(())
    };
    write(&mut out).map_err(|e| CliError::io("writing --trace-out", e))
}

fn write_series(path: &PathBuf, trace: &RunTrace) -> Result<(), CliError> {
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| CliError::io("creating --series-out", e))?,
    );
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "k,phi,r_k")?;
        for (k, (phi, r)) in trace.phi_series.iter().zip(&trace.r_series).enumerate() {
            writeln!(out, "{k},{phi},{r}")?;
        }
        Ok(())
    };
    write(&mut out).map_err(|e| CliError::io("writing --series-out", e))
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let mut out =
        BufWriter::new(File::create(path).map_err(|e| CliError::io("creating output file", e))?);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| CliError::Io(format!("serializing json: {e}")))?;
    out.write_all(b"\n")
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io("writing json", e))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = File::open(&args.config).map_err(|e| CliError::io("opening --config", e))?;
    let spec: SweepSpec = serde_json::from_reader(file)
        .map_err(|e| CliError::Validation(format!("--config: {e}")))?;

    let mut opts = SweepOptions::default();
    if let Some(engine) = args.engine {
        opts.engine = engine.into();
    }
    if let Some(form) = args.overhead_form {
        opts.overhead_log_arg = form.into();
    }
    if let Some(max_runs) = args.max_runs {
        opts.max_runs = max_runs;
    }
    opts.threads = read_threads_env()?;

    let result = run_sweep(&spec, &opts)?;

    if let Some(path) = &args.out_csv {
        let mut out = BufWriter::new(
            File::create(path).map_err(|e| CliError::io("creating --out-csv", e))?,
        );
        write_runs_csv(&mut out, &result.rows).map_err(|e| CliError::io("writing --out-csv", e))?;
    }
    if let Some(path) = &args.out_json {
        let summary = serde_json::json!({
            "spec": spec,
            "engine": opts.engine,
            "overhead_log_arg": opts.overhead_log_arg,
            "cells": result.cells,
            "fitted_constant": result.fitted_constant,
        });
        write_json(path, &summary)?;
    }

    for cell in &result.cells {
        let overhead = cell
            .overhead_quartiles
            .map(|q| sig6(q.median))
            .unwrap_or_else(|| "na".to_string());
        println!(
            "cell W={} p={} lambda={} reps={} makespan_mean={} makespan_median={} \
             overhead_median={} mean_R_until_tau={} excluded={}",
            cell.total_work,
            cell.processors,
            cell.lambda,
            cell.replications,
            sig6(cell.makespan_mean),
            sig6(cell.makespan_quartiles.median),
            overhead,
            sig6(cell.mean_r_until_tau),
            cell.overhead_excluded,
        );
    }
    match result.fitted_constant {
        Some(c) => println!("fitted_c {}", sig6(c)),
        None => println!("fitted_c na"),
    }
    println!("runs {}", result.rows.len());
    Ok(())
}

fn read_threads_env() -> Result<Option<usize>, CliError> {
    match std::env::var("WS_SIM_THREADS") {
        Ok(v) => {
            let n: usize = v.parse().map_err(|_| {
                CliError::Validation(format!("WS_SIM_THREADS must be a positive integer, got {v:?}"))
            })?;
            if n == 0 {
                return Err(CliError::Validation(
                    "WS_SIM_THREADS must be a positive integer".into(),
                ));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_gamma(args: GammaArgs) -> Result<(), CliError> {
    if args.p < 2 {
        return Err(CliError::Validation("p must be ≥ 2".into()));
    }
    let p_max = args.p_max.unwrap_or(args.p);
    if p_max < args.p {
        return Err(CliError::Validation("--p-max must be ≥ --p".into()));
    }
    println!("p,gamma");
    for p in args.p..=p_max {
        println!("{p},{}", sig6(analysis::gamma(p)?));
    }
    println!("cap,{}", sig6(analysis::gamma_cap()));
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    if args.lambda == 0 {
        return Err(CliError::Validation("lambda must be ≥ 1".into()));
    }
    let report = analysis::bound_report(args.total_work, args.p, args.lambda, args.x)?;
    if report.expectation_degenerate_log {
        eprintln!(
            "warning: W ≤ 2λ, log term vanishes; bound reduces to W/p + 3λ"
        );
    }
    if report.lemma2_degenerate_log {
        eprintln!("warning: W ≤ λ, request bound degenerate");
    }
    println!("gamma {}", sig6(report.gamma));
    println!("bound_expectation {}", sig6(report.bound_expectation));
    println!("lemma2_bound_R {}", sig6(report.lemma2_bound_r));
    if let (Some(paper), Some(proof)) = (report.tail_prob_paper, report.tail_prob_proof) {
        println!("tail_paper {}", sig6(paper));
        println!("tail_proof {}", sig6(proof));
    }
    if let Some(path) = &args.out_json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<(), CliError> {
    let file = File::open(&args.snapshot).map_err(|e| CliError::io("opening --snapshot", e))?;
    let snapshot: Snapshot = serde_json::from_reader(file)
        .map_err(|e| CliError::Validation(format!("--snapshot: {e}")))?;
    snapshot
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = analysis::lemma1_probe(&snapshot, args.ensemble)?;
    println!("r {}", report.r_incoming);
    println!("phi {}", report.phi_before);
    println!("ensemble {}", report.ensemble);
    println!("mean_ratio {}", sig6(report.mean_ratio));
    println!("bound {}", sig6(report.bound));
    println!("std_error {}", sig6(report.std_error));
    println!("satisfied {}", report.satisfied);
    Ok(())
}
