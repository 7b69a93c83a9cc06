//! Result files: `metadata.json`, `trace.csv`, `grid.csv`, `convergence.svg`.
//!
//! The trace CSV leaves out wall time so repeated seeded runs are byte-identical;
//! wall time goes to the metadata instead.

use std::fs;
use std::path::Path;

use hetvr::trace::ConvergenceTrace;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::tune::GridPoint;

pub const TRACE_HEADER: [&str; 8] = [
    "solver",
    "iteration",
    "pass",
    "grad_calls",
    "value_calls",
    "gap",
    "distance",
    "infeasibility",
];

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// One row per recorded pass, solvers in the given order.
pub fn write_trace_csv(path: &Path, traces: &[&ConvergenceTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for t in traces {
        for r in &t.records {
            w.write_record([
                t.solver.clone(),
                r.iteration.to_string(),
                format!("{}", r.passes),
                r.grad_calls.to_string(),
                r.value_calls.to_string(),
                format!("{:e}", r.gap),
                opt(r.distance),
                opt(r.infeasibility),
            ])?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn write_grid_csv(path: &Path, points: &[GridPoint], selected: &[(String, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "solver",
        "k",
        "multiplier",
        "scale",
        "final_gap",
        "passes",
        "passes_to_tolerance",
        "outcome",
        "selected",
    ])?;
    let mut index = std::collections::HashMap::<&str, usize>::new();
    for p in points {
        let i = index.entry(p.solver.as_str()).or_insert(0);
        let chosen = selected.iter().any(|(s, b)| s == &p.solver && *b == *i);
        *i += 1;
        let outcome = match (&p.outcome, &p.error) {
            (Some(o), _) => serde_json::to_value(o).expect("enum").as_str().unwrap_or("").to_string(),
            (None, Some(_)) => "rejected".into(),
            (None, None) => String::new(),
        };
        w.write_record([
            p.solver.clone(),
            p.at.k.to_string(),
            p.at.multiplier.to_string(),
            format!("{:e}", p.at.scale),
            opt(p.final_gap),
            p.passes.map_or_else(String::new, |v| v.to_string()),
            p.passes_to_tolerance.map_or_else(String::new, |v| v.to_string()),
            outcome,
            chosen.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("metadata serializes");
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// A parsed trace row, for plotting and comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub solver: String,
    pub pass: f64,
    pub grad_calls: u64,
    pub gap: f64,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| HarnessError::Config {
            field: format!("{}:{name}", path.display()),
            message: "missing column".into(),
        })
    };
    let (s, p, g, c) = (col("solver")?, col("pass")?, col("gap")?, col("grad_calls")?);
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| HarnessError::Config {
            field: format!("{}:{}", path.display(), line + 2),
            message: format!("unparsable {what}"),
        };
        rows.push(TraceRow {
            solver: rec[s].to_string(),
            pass: rec[p].parse().map_err(|_| bad("pass"))?,
            grad_calls: rec[c].parse().map_err(|_| bad("grad_calls"))?,
            gap: rec[g].parse().map_err(|_| bad("gap"))?,
        });
    }
    Ok(rows)
}
