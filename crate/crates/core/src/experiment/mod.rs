//! Experiment orchestration behind the `srom` binary: configuration, data
//! generation, the Burgers / KSE / file-stream pipelines and run comparison.

mod burgers;
mod compare;
mod config;
mod custom;
mod generate;
mod kse;

pub use burgers::{burgers_sources, run_burgers, BurgersReport};
pub use compare::{compare_runs, comparison_table, ComparisonRow};
pub use config::{parse_quadratic, quadratic_name, Experiment, ExperimentConfig};
pub use custom::run_custom;
pub use generate::{burgers_paths, generate, kse_paths, planned_files, PlannedFile};
pub use kse::{kse_initial_conditions, kse_sources, run_kse, KseReport, LyapunovEntry};

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::io::write_matrix;
use crate::metrics::{memory_cost, MemoryBudget, MetricTable, SketchAccounting};
use crate::opinf::{Paradigm, RlsMethod, SolverConfig, Terms};
use crate::stream_svd::sketch_sizes;

/// Process exit status for a failed command: 2 for configuration and usage
/// errors, 3 for numerical failure, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::AllUnstable
        | Error::NonfiniteState { .. }
        | Error::NonfiniteUpdate { .. }
        | Error::RankDeficient { .. }
        | Error::RankDeficientSketch { .. }
        | Error::ZeroSnapshot { .. } => 3,
        _ => 1,
    }
}

/// Progress sink writing to stderr every 1000 streamed snapshots or rows.
pub struct Reporter {
    quiet: bool,
}

impl Reporter {
    pub fn new(quiet: bool) -> Self {
        Self { quiet }
    }

    pub fn quiet() -> Self {
        Self::new(true)
    }

    pub fn message(&self, msg: &str) {
        if !self.quiet {
            let _ = writeln!(std::io::stderr(), "{msg}");
        }
    }

    /// Callback for the library's `(stage, count)` progress hooks.
    pub fn hook(&self, context: impl Into<String>) -> impl FnMut(&str, usize) + '_ {
        let context = context.into();
        move |stage: &str, count: usize| {
            if !self.quiet && count % 1000 == 0 {
                let _ = writeln!(std::io::stderr(), "[{context}] {stage} {count}");
            }
        }
    }
}

/// `f` over `items` on all available cores, results in input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len());
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Method label used in CSV rows and operator file names.
pub fn method_label(paradigm: Paradigm, rls: Option<RlsMethod>) -> String {
    match (paradigm.is_recursive(), rls) {
        (true, Some(m)) => format!("{}-{}", paradigm.name(), m.name()),
        _ => paradigm.name().to_string(),
    }
}

/// Every `(paradigm, rls method)` pair the configuration asks for.
pub fn method_variants(cfg: &ExperimentConfig) -> Vec<(Paradigm, Option<RlsMethod>)> {
    let mut out = Vec::new();
    for &p in &cfg.paradigms {
        if p.is_recursive() {
            out.extend(cfg.rls_methods.iter().map(|&m| (p, Some(m))));
        } else {
            out.push((p, None));
        }
    }
    out
}

pub(crate) fn solver_config(
    cfg: &ExperimentConfig,
    paradigm: Paradigm,
    rls: Option<RlsMethod>,
    r: usize,
    gamma: (f64, f64),
    checkpoints: Vec<usize>,
    trace: bool,
) -> SolverConfig {
    SolverConfig {
        paradigm,
        svd_method: cfg.svd_method,
        rls_method: rls.unwrap_or(RlsMethod::InverseQr),
        r,
        terms: Terms {
            quadratic: cfg.quadratic,
            input: cfg.input,
            constant: cfg.constant,
        },
        gamma1: gamma.0,
        gamma2: gamma.1,
        fd_scheme: cfg.fd_scheme,
        dt: cfg.dt,
        checkpoints,
        seed: cfg.seed,
        trace,
    }
}

/// Configured checkpoints, or about 12 log-spaced row counts ending at `rows`.
pub(crate) fn checkpoint_schedule(cfg: &ExperimentConfig, rows: usize) -> Vec<usize> {
    if !cfg.checkpoints.is_empty() {
        return cfg
            .checkpoints
            .iter()
            .copied()
            .filter(|&k| k <= rows)
            .collect();
    }
    let lo = 10f64.min(rows as f64).max(1.0);
    let mut v: Vec<usize> = (0..12)
        .map(|i| (lo * (rows as f64 / lo).powf(i as f64 / 11.0)).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Deterministic per-trajectory seed.
pub(crate) fn derived_seed(base: u64, group: usize, member: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((group as u64) << 32) ^ member as u64
}

pub(crate) fn memory_table(
    cfg: &ExperimentConfig,
    n: usize,
    k_svd: usize,
    k_ls: usize,
    m: usize,
) -> Result<MetricTable> {
    let mut t = MetricTable::new(
        "memory",
        &[
            "method",
            "svd_method",
            "r",
            "accounting",
            "batch_svd_floats",
            "batch_ls_floats",
            "stream_svd_floats",
            "stream_ls_floats",
            "svd_reduction_pct",
            "ls_reduction_pct",
            "total_reduction_pct",
        ],
    );
    for (p, rls) in method_variants(cfg) {
        for &r in &cfg.r {
            let (q, s, _) = sketch_sizes(r);
            for (acc, name) in [
                (SketchAccounting::Leading, "leading"),
                (SketchAccounting::Full, "full"),
            ] {
                let b = MemoryBudget {
                    paradigm: p,
                    svd_method: cfg.svd_method,
                    n,
                    k_svd,
                    k_ls,
                    r,
                    m: if cfg.input { m } else { 0 },
                    quadratic: cfg.quadratic,
                    constant: cfg.constant,
                    q,
                    s,
                    accounting: acc,
                };
                let rep = memory_cost(&b)?;
                t.push([
                    method_label(p, rls),
                    cfg.svd_method.name().to_string(),
                    r.to_string(),
                    name.to_string(),
                    rep.batch.svd_floats.to_string(),
                    rep.batch.ls_floats.to_string(),
                    rep.streaming.svd_floats.to_string(),
                    rep.streaming.ls_floats.to_string(),
                    rep.svd_reduction_pct().to_string(),
                    rep.ls_reduction_pct().to_string(),
                    rep.total_reduction_pct().to_string(),
                ])?;
            }
        }
    }
    Ok(t)
}

/// Writes `m` as `<dir>/<name>.srom`, creating `dir`.
pub(crate) fn save_matrix(dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join(format!("{name}.srom")), m)
}

/// Writes every table into `dir` and returns the paths.
pub fn write_tables(tables: &[MetricTable], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    tables.iter().map(|t| t.write_to(dir)).collect()
}
