//! Batch experiment driver.
//!
//! Expands a [`RunConfig`] into (phantom, mode) cells, runs each cell,
//! and writes one trace CSV per cell plus a `summary.csv` and a plotting
//! script into the output directory. Cells are independent, so they run
//! on parallel worker threads; every file is written to a temporary name
//! first and renamed into place, and all aggregate output is emitted in
//! deterministic (phantom, mode) order.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::RunConfig;
use crate::objective::{ObjectiveError, Problem};
use crate::optimizer::{run_solver, SolverError, SolverMode};
use crate::phantom::{make_phantom, PhantomError, PhantomKind};
use crate::tomography::{self, TomographyError};
use crate::trace::{read_trace, write_trace, RunStatus, RunTrace, TraceError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot compare traces for different problems: {0:?} vs {1:?}")]
    ProblemMismatch(String, String),
    #[error("comparison needs at least one trace with at least one record")]
    EmptyComparison,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Label identifying a synthesized problem instance, e.g. `mixed-64-u0.02`.
pub fn problem_label(kind: PhantomKind, size: usize, undersampling: f64) -> String {
    format!("{}-{}-u{}", kind.name(), size, undersampling)
}

/// Outcome of one (phantom, mode) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub problem: String,
    pub mode: SolverMode,
    pub status: RunStatus,
    pub final_f: f64,
    pub final_gnorm: f64,
    pub fine_grad_evals: usize,
    pub iterations: usize,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub cells: Vec<CellResult>,
    pub summary_path: PathBuf,
}

/// Builds the synthetic problem for one phantom under the config's
/// discretization.
pub fn build_problem(cfg: &RunConfig, kind: PhantomKind) -> Result<Problem, DriverError> {
    let ph = make_phantom(kind, cfg.problem.size)?;
    let pb = tomography::synthesize(
        &ph,
        cfg.problem.undersampling,
        cfg.problem.lambda,
        cfg.problem.rho,
    )?;
    Ok(pb)
}

/// Runs one cell and labels the trace with the problem identity.
pub fn run_cell(cfg: &RunConfig, kind: PhantomKind, mode: SolverMode) -> Result<RunTrace, DriverError> {
    let pb = build_problem(cfg, kind)?;
    let mut trace = run_solver(&pb, &cfg.solver_config(mode))?;
    trace.problem = problem_label(kind, cfg.problem.size, cfg.problem.undersampling);
    Ok(trace)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DriverError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn trace_to_bytes(trace: &RunTrace) -> Result<Vec<u8>, DriverError> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    Ok(buf)
}

/// Runs every (phantom, mode) cell of the config, in parallel, writing one
/// trace CSV per cell plus `summary.csv` and `plot_traces.py` into
/// `out_dir`. Stalled runs are ordinary rows in the summary, not errors.
pub fn run_batch(cfg: &RunConfig, out_dir: &Path) -> Result<BatchSummary, DriverError> {
    let kinds = cfg
        .phantom_kinds()
        .expect("config validated before run_batch");
    let modes = cfg.modes().expect("config validated before run_batch");
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut cells: Vec<(PhantomKind, SolverMode)> = Vec::new();
    for &kind in &kinds {
        for &mode in &modes {
            cells.push((kind, mode));
        }
    }

    let outcomes: Vec<Result<(RunTrace, PathBuf), DriverError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(kind, mode)| {
                scope.spawn(move || {
                    let trace = run_cell(cfg, kind, mode)?;
                    let path = out_dir.join(format!("{}-{}.csv", trace.problem, mode.name()));
                    write_atomic(&path, &trace_to_bytes(&trace)?)?;
                    Ok((trace, path))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("cell worker panicked"))
            .collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    for ((kind, mode), outcome) in cells.into_iter().zip(outcomes) {
        let (trace, path) = outcome?;
        let last = trace
            .records
            .last()
            .expect("a run records at least the start point");
        results.push(CellResult {
            problem: problem_label(kind, cfg.problem.size, cfg.problem.undersampling),
            mode,
            status: trace.status,
            final_f: last.f,
            final_gnorm: last.gnorm,
            fine_grad_evals: last.fine_grad_evals,
            iterations: last.iter,
            trace_path: path,
        });
    }

    let summary_path = out_dir.join("summary.csv");
    let mut summary = String::from("problem,mode,status,final_f,final_gnorm,fine_grad_evals,iterations\n");
    for c in &results {
        summary.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{},{}\n",
            c.problem, c.mode, c.status, c.final_f, c.final_gnorm, c.fine_grad_evals, c.iterations
        ));
    }
    write_atomic(&summary_path, summary.as_bytes())?;
    write_atomic(&out_dir.join("plot_traces.py"), PLOT_SCRIPT.as_bytes())?;

    Ok(BatchSummary {
        cells: results,
        summary_path,
    })
}

/// Relative-objective thresholds tabulated by [`compare_traces`].
pub const COMPARE_THRESHOLDS: [f64; 3] = [0.5, 0.1, 0.01];

/// First record at which a trace reached a relative-objective threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdHit {
    pub iter: usize,
    pub fine_grad_evals: usize,
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub mode: String,
    pub final_f: f64,
    /// One entry per [`COMPARE_THRESHOLDS`] value; `None` when the trace
    /// never reached the threshold.
    pub hits: [Option<ThresholdHit>; 3],
}

#[derive(Debug, Clone)]
pub struct CompareTable {
    pub problem: String,
    pub f_best: f64,
    pub f_start: f64,
    pub rows: Vec<CompareRow>,
}

/// Tabulates, per trace, the iteration and cumulative fine-gradient
/// evaluation count at which the relative objective
/// `(f_k - f_best) / (f_0 - f_best)` first drops to each threshold.
/// `f_best` is the smallest value any compared trace reached; all traces
/// must describe the same problem.
pub fn compare_traces(traces: &[RunTrace]) -> Result<CompareTable, DriverError> {
    let first = traces
        .iter()
        .find(|t| !t.records.is_empty())
        .ok_or(DriverError::EmptyComparison)?;
    for t in traces {
        if t.problem != first.problem {
            return Err(DriverError::ProblemMismatch(
                first.problem.clone(),
                t.problem.clone(),
            ));
        }
    }
    let f_best = traces
        .iter()
        .flat_map(|t| t.records.iter().map(|r| r.f))
        .fold(f64::INFINITY, f64::min);
    let f_start = first.records[0].f;

    let rows = traces
        .iter()
        .map(|t| {
            let mut hits = [None; 3];
            if let Some(start) = t.records.first() {
                let denom = start.f - f_best;
                for (slot, &threshold) in hits.iter_mut().zip(&COMPARE_THRESHOLDS) {
                    *slot = t
                        .records
                        .iter()
                        .find(|r| {
                            if denom <= 0.0 {
                                // Already optimal at the start: every
                                // threshold is met immediately.
                                true
                            } else {
                                (r.f - f_best) / denom <= threshold
                            }
                        })
                        .map(|r| ThresholdHit {
                            iter: r.iter,
                            fine_grad_evals: r.fine_grad_evals,
                        });
                }
            }
            CompareRow {
                mode: t.mode.clone(),
                final_f: t.records.last().map_or(f64::NAN, |r| r.f),
                hits,
            }
        })
        .collect();

    Ok(CompareTable {
        problem: first.problem.clone(),
        f_best,
        f_start,
        rows,
    })
}

/// Renders a comparison as an aligned text table. Unreached thresholds
/// print as `-`.
pub fn render_compare(table: &CompareTable) -> String {
    let mut out = format!(
        "problem {}  (f_best = {:.6e})\n",
        table.problem, table.f_best
    );
    out.push_str(&format!(
        "{:<22} {:>14} {:>16} {:>16} {:>16}\n",
        "mode", "final_f", "rel<=0.5", "rel<=0.1", "rel<=0.01"
    ));
    for row in &table.rows {
        let cells: Vec<String> = row
            .hits
            .iter()
            .map(|h| match h {
                Some(hit) => format!("it {} / ev {}", hit.iter, hit.fine_grad_evals),
                None => "-".to_string(),
            })
            .collect();
        out.push_str(&format!(
            "{:<22} {:>14.6e} {:>16} {:>16} {:>16}\n",
            row.mode, row.final_f, cells[0], cells[1], cells[2]
        ));
    }
    out
}

/// Reads a trace CSV from disk.
pub fn load_trace(path: &Path) -> Result<RunTrace, DriverError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(read_trace(BufReader::new(file))?)
}

/// Matplotlib script dropped next to the trace CSVs. One figure per
/// problem: relative objective vs iteration per mode, log scale, with
/// black dots on iterations whose search direction came from the coarse
/// grid.
const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plot every trace CSV in this directory, one figure per problem.

Relative objective is (f_k - f_best) / (f_0 - f_best), with f_best the
minimum over all traces of the same problem. Black dots mark iterations
whose descent direction was computed on the coarse grid.
"""
import csv
import pathlib
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = pathlib.Path(__file__).resolve().parent


def read_trace(path):
    meta, rows = {}, []
    with open(path, newline="") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                meta[key] = value
                continue
            cells = line.split(",")
            if header is None:
                header = {name: i for i, name in enumerate(cells)}
                continue
            rows.append(
                {
                    "iter": int(cells[header["iter"]]),
                    "level": cells[header["level"]],
                    "f": float(cells[header["f"]]),
                }
            )
    return meta, rows


def main():
    by_problem = defaultdict(list)
    for path in sorted(HERE.glob("*.csv")):
        if path.name == "summary.csv":
            continue
        meta, rows = read_trace(path)
        if rows:
            by_problem[meta.get("problem", path.stem)].append((meta, rows))

    if not by_problem:
        sys.exit("no trace CSVs found next to this script")

    floor = 1e-16
    for problem, traces in sorted(by_problem.items()):
        f_best = min(r["f"] for _, rows in traces for r in rows)
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for meta, rows in traces:
            f0 = rows[0]["f"]
            denom = max(f0 - f_best, floor)
            its = [r["iter"] for r in rows]
            rel = [max((r["f"] - f_best) / denom, floor) for r in rows]
            (line,) = ax.semilogy(its, rel, label=meta.get("mode", "?"))
            coarse = [(i, v) for i, v, r in zip(its, rel, rows) if r["level"] == "coarse"]
            if coarse:
                ax.plot(*zip(*coarse), "ko", markersize=4, zorder=3 + line.get_zorder())
        ax.set_xlabel("iteration")
        ax.set_ylabel("relative objective")
        ax.set_title(problem)
        ax.legend()
        fig.tight_layout()
        out = HERE / f"{problem}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
"##;
