//! Solver iteration traces and their CSV form.
//!
//! The on-disk layout is fixed so downstream tooling can rely on it:
//! comment lines `# problem=...`, `# mode=...`, `# status=...`, then the
//! header `iter,level,f,gnorm,fine_grad_evals,seconds`, then one row per
//! recorded iterate. Floats are written with 12 significant digits, which
//! makes reruns of a deterministic solver byte-identical.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace header is missing the {column:?} column")]
    MissingColumn { column: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which grid produced the step that led to this iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fine,
    Coarse,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Fine => "fine",
            Level::Coarse => "coarse",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine" => Ok(Level::Fine),
            "coarse" => Ok(Level::Coarse),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Gradient norm dropped below the tolerance, or a projected step
    /// detected stationarity.
    Converged,
    /// Iteration cap reached.
    MaxIterations,
    /// Both line searches failed to make progress.
    Stalled,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterations => "max_iterations",
            RunStatus::Stalled => "stalled",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged" => Ok(RunStatus::Converged),
            "max_iterations" => Ok(RunStatus::MaxIterations),
            "stalled" => Ok(RunStatus::Stalled),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub level: Level,
    pub f: f64,
    pub gnorm: f64,
    /// Cumulative count of fine-level objective/gradient evaluations,
    /// including every line-search probe.
    pub fine_grad_evals: usize,
    pub seconds: f64,
}

/// A full solver run: identity, per-iterate records, and how it ended.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// Problem identity, e.g. `mixed-128-u0.02`. Used by comparison tooling
    /// to refuse apples-to-oranges tables.
    pub problem: String,
    pub mode: String,
    pub status: RunStatus,
    pub records: Vec<IterateRecord>,
}

impl RunTrace {
    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.f)
    }
}

pub const TRACE_HEADER: &str = "iter,level,f,gnorm,fine_grad_evals,seconds";

pub fn write_trace<W: Write>(mut w: W, trace: &RunTrace) -> Result<(), TraceError> {
    writeln!(w, "# problem={}", trace.problem)?;
    writeln!(w, "# mode={}", trace.mode)?;
    writeln!(w, "# status={}", trace.status)?;
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{:.12e},{:.12e},{},{:.6}",
            r.iter, r.level, r.f, r.gnorm, r.fine_grad_evals, r.seconds
        )?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<RunTrace, TraceError> {
    let mut problem = String::new();
    let mut mode = String::new();
    let mut status = RunStatus::MaxIterations;
    let mut header: Option<Vec<String>> = None;
    let mut records = Vec::new();

    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                match key.trim() {
                    "problem" => problem = value.trim().to_string(),
                    "mode" => mode = value.trim().to_string(),
                    "status" => {
                        status = value.trim().parse().map_err(|reason| TraceError::Parse {
                            line: lineno,
                            reason,
                        })?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if header.is_none() {
            let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            for want in TRACE_HEADER.split(',') {
                if !cols.iter().any(|c| c == want) {
                    return Err(TraceError::MissingColumn { column: want });
                }
            }
            header = Some(cols);
            continue;
        }
        let cols = header.as_ref().expect("set above");
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < cols.len() {
            return Err(TraceError::Parse {
                line: lineno,
                reason: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let get = |name: &str| -> &str {
            let idx = cols.iter().position(|c| c == name).expect("checked above");
            fields[idx]
        };
        let parse_err = |what: &str, tok: &str| TraceError::Parse {
            line: lineno,
            reason: format!("bad {what} value {tok:?}"),
        };
        records.push(IterateRecord {
            iter: get("iter")
                .parse()
                .map_err(|_| parse_err("iter", get("iter")))?,
            level: get("level")
                .parse()
                .map_err(|reason: String| TraceError::Parse {
                    line: lineno,
                    reason,
                })?,
            f: get("f").parse().map_err(|_| parse_err("f", get("f")))?,
            gnorm: get("gnorm")
                .parse()
                .map_err(|_| parse_err("gnorm", get("gnorm")))?,
            fine_grad_evals: get("fine_grad_evals")
                .parse()
                .map_err(|_| parse_err("fine_grad_evals", get("fine_grad_evals")))?,
            seconds: get("seconds")
                .parse()
                .map_err(|_| parse_err("seconds", get("seconds")))?,
        });
    }

    if header.is_none() {
        return Err(TraceError::MissingColumn { column: "iter" });
    }
    Ok(RunTrace {
        problem,
        mode,
        status,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunTrace {
        RunTrace {
            problem: "checker-16-u0.25".to_string(),
            mode: "two_level_rg".to_string(),
            status: RunStatus::Converged,
            records: vec![
                IterateRecord {
                    iter: 0,
                    level: Level::Fine,
                    f: 12.34567890123456,
                    gnorm: 0.5,
                    fine_grad_evals: 1,
                    seconds: 0.0,
                },
                IterateRecord {
                    iter: 1,
                    level: Level::Coarse,
                    f: 3.0e-4,
                    gnorm: 1.0e-9,
                    fine_grad_evals: 7,
                    seconds: 0.0,
                },
            ],
        }
    }

    #[test]
    fn writes_the_documented_layout() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# problem=checker-16-u0.25");
        assert_eq!(lines[1], "# mode=two_level_rg");
        assert_eq!(lines[2], "# status=converged");
        assert_eq!(lines[3], TRACE_HEADER);
        assert_eq!(lines[4], "0,fine,1.234567890123e1,5.000000000000e-1,1,0.000000");
        assert_eq!(lines[5], "1,coarse,3.000000000000e-4,1.000000000000e-9,7,0.000000");
    }

    #[test]
    fn round_trips_through_csv() {
        let trace = sample();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back.problem, trace.problem);
        assert_eq!(back.mode, trace.mode);
        assert_eq!(back.status, trace.status);
        assert_eq!(back.records.len(), trace.records.len());
        for (a, b) in back.records.iter().zip(&trace.records) {
            assert_eq!(a.iter, b.iter);
            assert_eq!(a.level, b.level);
            assert_eq!(a.fine_grad_evals, b.fine_grad_evals);
            assert!((a.f - b.f).abs() <= 1e-11 * (1.0 + b.f.abs()));
            assert!((a.gnorm - b.gnorm).abs() <= 1e-11 * (1.0 + b.gnorm.abs()));
        }
    }

    #[test]
    fn tolerates_extra_columns() {
        let text = "# problem=p\n# mode=m\n# status=stalled\n\
                    iter,level,f,gnorm,fine_grad_evals,seconds,note\n\
                    0,fine,1.0e0,2.0e0,1,0.5,hello\n";
        let t = read_trace(text.as_bytes()).unwrap();
        assert_eq!(t.status, RunStatus::Stalled);
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].seconds, 0.5);
    }

    #[test]
    fn rejects_missing_columns_and_bad_rows() {
        let text = "iter,level,f\n0,fine,1.0\n";
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(TraceError::MissingColumn { .. })
        ));
        let text = "iter,level,f,gnorm,fine_grad_evals,seconds\n0,fine,xyz,1.0,1,0.0\n";
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(TraceError::Parse { line: 2, .. })
        ));
        assert!(read_trace("".as_bytes()).is_err());
    }
}
