//! Parameter sweeps, replication, per-cell statistics and the
//! least-squares fit of the empirical overhead constant.
//!
//! A sweep is deterministic: replication i of cell (W, p, λ) runs with
//! seed `base_seed ^ mix(W, p, λ, i)`, so cells and replications can be
//! executed in parallel and reduced by sorted key without changing any
//! result.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{bound_expectation_with_gamma, gamma, lemma2_bound_r};
use crate::engine::{run, RunOptions};
use crate::format::sig6;
use crate::mix::splitmix64;
use crate::model::{ConfigError, EngineKind, OverheadLogArg, SimConfig};
use crate::stats::{mean, quartiles, Quartiles};

/// Grid specification for a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "W_values")]
    pub w_values: Vec<u64>,
    pub p_values: Vec<u32>,
    pub lambda_values: Vec<u64>,
    pub replications: u32,
    pub base_seed: u64,
}

/// Cross-cutting sweep switches (the spec file stays purely the grid).
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub engine: EngineKind,
    pub overhead_log_arg: OverheadLogArg,
    /// Budget: grid size × replications must not exceed this.
    pub max_runs: u64,
    /// Worker threads; `None` uses the default pool.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            engine: EngineKind::Event,
            overhead_log_arg: OverheadLogArg::WOverLambda,
            max_runs: 1_000_000,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep budget exceeded: {runs} runs requested, budget {max_runs}")]
    BudgetExceeded { runs: u64, max_runs: u64 },
    #[error("fit needs ≥ 3 distinct cells with positive mean overhead (got {0})")]
    InsufficientData(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Seed of replication `rep` of cell (W, p, λ) under `base_seed`.
pub fn seed_for_cell(base_seed: u64, w: u64, p: u32, lambda: u64, rep: u32) -> u64 {
    let mut h = splitmix64(w);
    h = splitmix64(h ^ u64::from(p));
    h = splitmix64(h ^ lambda);
    h = splitmix64(h ^ u64::from(rep));
    base_seed ^ h
}

/// One run's result row (the sweep CSV schema).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub total_work: u64,
    pub processors: u32,
    pub latency: u64,
    pub seed: u64,
    pub makespan: u64,
    pub steals_sent: u64,
    pub steals_success: u64,
    pub steals_failed: u64,
    pub tau: u64,
    pub r_until_tau: u64,
    /// W/p + 4λγ(p)log2(W/2λ) + 3λ with exact γ(p); `None` when p < 2.
    pub bound_theorem: Option<f64>,
    /// Overhead ratio for this run; `None` when undefined (p < 2 or
    /// makespan = W/p).
    pub overhead_ratio: Option<f64>,
    pub conservation_violations: u64,
    pub phi_violations: u64,
}

/// Per-run overhead ratio: the bound's steal term over the measured one,
/// `(4·γ·λ·log2(arg) + 3λ) / (makespan − W/p)`.
///
/// Undefined (None) when the run has no idle overhead (makespan = W/p,
/// perfect balance; the p = 1 cell always lands here).
pub fn overhead_ratio_for_run(
    w: u64,
    p: u32,
    lambda: u64,
    makespan: u64,
    gamma_p: f64,
    form: OverheadLogArg,
) -> Option<f64> {
    let wp = w as f64 / f64::from(p);
    let measured = makespan as f64 - wp;
    if measured <= 0.0 {
        return None;
    }
    let arg = match form {
        OverheadLogArg::WOverLambda => w as f64 / lambda as f64,
        OverheadLogArg::WOver2Lambda => w as f64 / (2.0 * lambda as f64),
    };
    let numerator = 4.0 * gamma_p * lambda as f64 * arg.log2() + 3.0 * lambda as f64;
    Some(numerator / measured)
}

/// Result row for one finished run (computes γ(p) on the fly; sweeps use
/// a cached γ instead).
pub fn run_row(config: &SimConfig, trace: &crate::model::RunTrace) -> RunRow {
    row_with_gamma(config, trace, gamma(config.processors).ok())
}

fn row_with_gamma(
    config: &SimConfig,
    trace: &crate::model::RunTrace,
    gamma_p: Option<f64>,
) -> RunRow {
    let bound_theorem = gamma_p.map(|g| {
        bound_expectation_with_gamma(config.total_work, config.processors, config.latency, g)
            .value
    });
    let overhead_ratio = gamma_p.and_then(|g| {
        overhead_ratio_for_run(
            config.total_work,
            config.processors,
            config.latency,
            trace.makespan,
            g,
            config.overhead_log_arg,
        )
    });
    RunRow {
        total_work: config.total_work,
        processors: config.processors,
        latency: config.latency,
        seed: config.seed,
        makespan: trace.makespan,
        steals_sent: trace.steals_sent,
        steals_success: trace.steals_success,
        steals_failed: trace.steals_failed,
        tau: trace.tau,
        r_until_tau: trace.r_until_tau,
        bound_theorem,
        overhead_ratio,
        conservation_violations: trace.conservation_violations,
        phi_violations: trace.phi_violations,
    }
}

/// Aggregated statistics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    #[serde(rename = "W")]
    pub total_work: u64,
    #[serde(rename = "p")]
    pub processors: u32,
    pub lambda: u64,
    pub replications: u32,
    pub makespan_mean: f64,
    pub makespan_min: u64,
    pub makespan_max: u64,
    pub makespan_quartiles: Quartiles,
    /// Quartiles over runs with a defined ratio; `None` when every run
    /// was excluded.
    pub overhead_quartiles: Option<Quartiles>,
    /// Runs without idle overhead (ratio undefined).
    pub overhead_excluded: u32,
    pub mean_steals_sent: f64,
    pub mean_steals_success: f64,
    pub mean_steals_failed: f64,
    pub mean_r_until_tau: f64,
    /// Theorem bound for the cell (exact γ); `None` when p < 2.
    pub bound_theorem: Option<f64>,
    /// Lemma-2 request bound 2pγ·log2(W/λ); `None` when p < 2.
    pub lemma2_bound_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub cells: Vec<CellStats>,
    /// Least-squares c in makespan ≈ W/p + c·λ·log2(W/λ); `None` when the
    /// grid has fewer than 3 usable cells.
    pub fitted_constant: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<RunRow>,
}

/// Run the full grid, `replications` independent runs per cell.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepResult, ExperimentError> {
    if spec.w_values.is_empty() || spec.p_values.is_empty() || spec.lambda_values.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if spec.replications == 0 {
        return Err(ExperimentError::Config(ConfigError::NonPositiveReplications));
    }
    let cells_n = spec.w_values.len() as u64 * spec.p_values.len() as u64
        * spec.lambda_values.len() as u64;
    let runs = cells_n * u64::from(spec.replications);
    if runs > opts.max_runs {
        return Err(ExperimentError::BudgetExceeded {
            runs,
            max_runs: opts.max_runs,
        });
    }

    let mut gammas: HashMap<u32, Option<f64>> = HashMap::new();
    for &p in &spec.p_values {
        gammas.insert(p, gamma(p).ok());
    }

    let mut jobs = Vec::with_capacity(runs as usize);
    for &w in &spec.w_values {
        for &p in &spec.p_values {
            for &lambda in &spec.lambda_values {
                let config = SimConfig {
                    total_work: w,
                    processors: p,
                    latency: lambda,
                    seed: 0,
                    engine: opts.engine,
                    overhead_log_arg: opts.overhead_log_arg,
                    replications: spec.replications,
                };
                config.validate()?;
                for rep in 0..spec.replications {
                    let seed = seed_for_cell(spec.base_seed, w, p, lambda, rep);
                    jobs.push(SimConfig { seed, ..config.clone() });
                }
            }
        }
    }

    let run_job = |config: &SimConfig| -> RunRow {
        let trace = run(config, &RunOptions::default());
        row_with_gamma(config, &trace, gammas[&config.processors])
    };

    let rows: Vec<RunRow> = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(|| jobs.par_iter().map(run_job).collect()),
        None => jobs.par_iter().map(run_job).collect(),
    };

    let reps = spec.replications as usize;
    let mut cells: Vec<CellStats> = rows
        .chunks(reps)
        .map(|chunk| cell_stats(chunk, &gammas))
        .collect();
    cells.sort_by_key(|c| (c.total_work, c.processors, c.lambda));
    let fitted_constant = fit_constant(&cells).ok();
    Ok(SweepResult {
        cells,
        fitted_constant,
        rows,
    })
}

fn cell_stats(rows: &[RunRow], gammas: &HashMap<u32, Option<f64>>) -> CellStats {
    let first = &rows[0];
    debug_assert!(rows
        .iter()
        .all(|r| (r.total_work, r.processors, r.latency)
            == (first.total_work, first.processors, first.latency)));
    let mut makespans: Vec<f64> = rows.iter().map(|r| r.makespan as f64).collect();
    makespans.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.overhead_ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gamma_p = gammas[&first.processors];
    CellStats {
        total_work: first.total_work,
        processors: first.processors,
        lambda: first.latency,
        replications: rows.len() as u32,
        makespan_mean: mean(&makespans),
        makespan_min: rows.iter().map(|r| r.makespan).min().unwrap(),
        makespan_max: rows.iter().map(|r| r.makespan).max().unwrap(),
        makespan_quartiles: quartiles(&makespans),
        overhead_quartiles: if ratios.is_empty() {
            None
        } else {
            Some(quartiles(&ratios))
        },
        overhead_excluded: (rows.len() - ratios.len()) as u32,
        mean_steals_sent: mean(&rows.iter().map(|r| r.steals_sent as f64).collect::<Vec<_>>()),
        mean_steals_success: mean(
            &rows.iter().map(|r| r.steals_success as f64).collect::<Vec<_>>(),
        ),
        mean_steals_failed: mean(
            &rows.iter().map(|r| r.steals_failed as f64).collect::<Vec<_>>(),
        ),
        mean_r_until_tau: mean(&rows.iter().map(|r| r.r_until_tau as f64).collect::<Vec<_>>()),
        bound_theorem: first.bound_theorem,
        lemma2_bound_r: gamma_p
            .and_then(|_| lemma2_bound_r(first.total_work, first.processors, first.latency).ok())
            .map(|b| b.value),
    }
}

/// Least-squares c minimizing Σ_cells (mean_makespan − W/p − c·λ·log2(W/λ))².
///
/// Cells without positive mean overhead (and cells with W ≤ λ, where the
/// regressor is not positive) are dropped; at least 3 distinct usable
/// cells are required. Because the fit runs on cell means, duplicating
/// every cell leaves c unchanged.
pub fn fit_constant(cells: &[CellStats]) -> Result<f64, ExperimentError> {
    let mut sum_xy = 0.0;
    let mut sum_xx = 0.0;
    let mut distinct = std::collections::HashSet::new();
    for cell in cells {
        if cell.total_work <= cell.lambda {
            continue;
        }
        let wp = cell.total_work as f64 / f64::from(cell.processors);
        let y = cell.makespan_mean - wp;
        if y <= 0.0 {
            continue;
        }
        let x = cell.lambda as f64 * (cell.total_work as f64 / cell.lambda as f64).log2();
        sum_xy += x * y;
        sum_xx += x * x;
        distinct.insert((cell.total_work, cell.processors, cell.lambda));
    }
    if distinct.len() < 3 {
        return Err(ExperimentError::InsufficientData(distinct.len()));
    }
    Ok(sum_xy / sum_xx)
}

/// Sweep CSV, one row per run. Header is part of the format contract.
pub const RUNS_CSV_HEADER: &str =
    "W,p,lambda,seed,makespan,steals_sent,steals_success,steals_failed,tau,R_until_tau,bound_theorem,overhead_ratio";

pub fn write_runs_csv<W: Write>(out: &mut W, rows: &[RunRow]) -> std::io::Result<()> {
    writeln!(out, "{RUNS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.total_work,
            r.processors,
            r.latency,
            r.seed,
            r.makespan,
            r.steals_sent,
            r.steals_success,
            r.steals_failed,
            r.tau,
            r.r_until_tau,
            r.bound_theorem.map(sig6).unwrap_or_default(),
            r.overhead_ratio.map(sig6).unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            w_values: vec![500],
            p_values: vec![4],
            lambda_values: vec![3],
            replications: 5,
            base_seed: 9,
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = tiny_spec();
        let a = run_sweep(&spec, &SweepOptions::default()).unwrap();
        let b = run_sweep(&spec, &SweepOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 5);
        assert_eq!(a.cells.len(), 1);
    }

    #[test]
    fn engines_agree_across_a_sweep() {
        let spec = tiny_spec();
        let event = run_sweep(&spec, &SweepOptions::default()).unwrap();
        let reference = run_sweep(
            &spec,
            &SweepOptions {
                engine: EngineKind::Reference,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        assert_eq!(event.rows, reference.rows);
    }

    #[test]
    fn single_processor_cell() {
        let spec = SweepSpec {
            w_values: vec![1000],
            p_values: vec![1],
            lambda_values: vec![7],
            replications: 3,
            base_seed: 1,
        };
        let result = run_sweep(&spec, &SweepOptions::default()).unwrap();
        let cell = &result.cells[0];
        assert_eq!(cell.makespan_min, 1000);
        assert_eq!(cell.makespan_max, 1000);
        assert_eq!(cell.mean_steals_sent, 0.0);
        assert_eq!(cell.overhead_quartiles, None);
        assert_eq!(cell.overhead_excluded, 3);
        assert_eq!(cell.bound_theorem, None);
        assert_eq!(result.fitted_constant, None);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = tiny_spec();
        let opts = SweepOptions {
            max_runs: 4,
            ..SweepOptions::default()
        };
        assert_eq!(
            run_sweep(&spec, &opts),
            Err(ExperimentError::BudgetExceeded { runs: 5, max_runs: 4 })
        );
    }

    fn synthetic_cell(w: u64, p: u32, lambda: u64, c: f64) -> CellStats {
        let x = lambda as f64 * (w as f64 / lambda as f64).log2();
        CellStats {
            total_work: w,
            processors: p,
            lambda,
            replications: 1,
            makespan_mean: w as f64 / f64::from(p) + c * x,
            makespan_min: 0,
            makespan_max: 0,
            makespan_quartiles: Quartiles { q1: 0.0, median: 0.0, q3: 0.0 },
            overhead_quartiles: None,
            overhead_excluded: 0,
            mean_steals_sent: 0.0,
            mean_steals_success: 0.0,
            mean_steals_failed: 0.0,
            mean_r_until_tau: 0.0,
            bound_theorem: None,
            lemma2_bound_r: None,
        }
    }

    #[test]
    fn fit_recovers_planted_constant() {
        let cells: Vec<CellStats> = [(1000u64, 4u32, 2u64), (5000, 8, 5), (20000, 16, 17)]
            .iter()
            .map(|&(w, p, l)| synthetic_cell(w, p, l, 5.0))
            .collect();
        let c = fit_constant(&cells).unwrap();
        assert!((c - 5.0).abs() < 1e-9, "c = {c}");
    }

    #[test]
    fn fit_invariant_under_duplication() {
        let cells: Vec<CellStats> = [(1000u64, 4u32, 2u64), (5000, 8, 5), (20000, 16, 17)]
            .iter()
            .map(|&(w, p, l)| synthetic_cell(w, p, l, 3.3))
            .collect();
        let c1 = fit_constant(&cells).unwrap();
        let doubled: Vec<CellStats> = cells.iter().chain(cells.iter()).cloned().collect();
        let c2 = fit_constant(&doubled).unwrap();
        assert!((c1 - c2).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_thin_data() {
        let cells = vec![synthetic_cell(1000, 1, 2, 0.0)]; // p=1: no overhead
        assert!(matches!(
            fit_constant(&cells),
            Err(ExperimentError::InsufficientData(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let row = RunRow {
            total_work: 4,
            processors: 2,
            latency: 1,
            seed: 1,
            makespan: 3,
            steals_sent: 1,
            steals_success: 1,
            steals_failed: 0,
            tau: 1,
            r_until_tau: 0,
            bound_theorem: Some(3602.014808895843),
            overhead_ratio: None,
            conservation_violations: 0,
            phi_violations: 0,
        };
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RUNS_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "4,2,1,1,3,1,1,0,1,0,3602.01,");
    }

    #[test]
    fn seeds_differ_across_cells_and_reps() {
        let a = seed_for_cell(0, 100, 4, 2, 0);
        let b = seed_for_cell(0, 100, 4, 2, 1);
        let c = seed_for_cell(0, 100, 8, 2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, seed_for_cell(0, 100, 4, 2, 0));
    }
}
