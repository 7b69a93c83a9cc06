//! End-to-end experiment: build the instance, run (or tune) every solver,
//! write the result directory.

use std::path::{Path, PathBuf};

use hetvr::sampling::{mix_seed, GENERATOR};
use hetvr::trace::Outcome;
use serde::Serialize;

use crate::config::{ExperimentConfig, GridSpec};
use crate::error::{HarnessError, Result};
use crate::instance::{Instance, InstanceSummary};
use crate::output::{ensure_dir, version_string, write_grid_csv, write_json, write_trace_csv};
use crate::plot::{emit_plot, Series};
use crate::runner::{run_solver, RunOutput, RunSummary};
use crate::tune::{tune_solver, GridPoint};

/// Stream of the solver's sampling RNG; the instance uses the seed itself.
pub fn run_seed(seed: u64) -> u64 {
    mix_seed(seed, 1)
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    name: &'a str,
    version: String,
    seed: u64,
    run_seed: u64,
    generator: &'static str,
    config: &'a ExperimentConfig,
    instance: &'a InstanceSummary,
    tuned: bool,
    /// No records were produced (e.g. a zero pass budget).
    empty_trace: bool,
    runs: Vec<RunSummary>,
    /// Solvers whose every grid point diverged.
    diverged_solvers: &'a [String],
    #[serde(skip_serializing_if = "<[GridPoint]>::is_empty")]
    grid: &'a [GridPoint],
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub instance: InstanceSummary,
    pub runs: Vec<RunOutput>,
    pub grid: Vec<GridPoint>,
    pub diverged_solvers: Vec<String>,
}

impl ExperimentReport {
    pub fn run(&self, solver: &str) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.spec.solver.name() == solver)
    }

    /// Every solver either diverged or could not be tuned.
    pub fn divergence_only(&self) -> bool {
        self.runs.iter().all(|r| r.trace.outcome == Outcome::Diverged)
    }
}

/// Runs `cfg`, tuning each solver when `tune` is set or the config carries a grid,
/// and writes the results into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, tune: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_dir(dir)?;
    let instance = Instance::build(&cfg.problem, cfg.seed)?;
    let summary = instance.summary();
    let seed = run_seed(cfg.seed);
    let grid_spec = cfg.grid.or(if tune { Some(GridSpec::default()) } else { None });

    let mut runs = Vec::new();
    let mut grid = Vec::new();
    let mut selected = Vec::new();
    let mut diverged = Vec::new();
    for spec in &cfg.solvers {
        match &grid_spec {
            Some(g) => match tune_solver(&instance, spec, cfg.stop, seed, g) {
                Ok(t) => {
                    selected.push((spec.solver.name().to_string(), t.best));
                    grid.extend(t.points);
                    runs.push(t.run);
                }
                Err(HarnessError::AllDiverged { solver }) => diverged.push(solver),
                Err(e) => return Err(e),
            },
            None => runs.push(run_solver(&instance, spec, cfg.stop, seed)?),
        }
    }

    let traces: Vec<_> = runs.iter().map(|r| &r.trace).collect();
    write_trace_csv(&dir.join("trace.csv"), &traces)?;
    if grid_spec.is_some() {
        write_grid_csv(&dir.join("grid.csv"), &grid, &selected)?;
    }
    let empty_trace = traces.iter().all(|t| t.records.is_empty());
    if !empty_trace {
        let series: Vec<Series> = traces
            .iter()
            .map(|t| Series {
                name: t.solver.clone(),
                points: t.records.iter().map(|r| (r.passes, r.gap)).collect(),
            })
            .collect();
        emit_plot(&series, &dir.join("convergence.svg"), &cfg.name)?;
    }
    let meta = Metadata {
        name: &cfg.name,
        version: version_string(),
        seed: cfg.seed,
        run_seed: seed,
        generator: GENERATOR,
        config: cfg,
        instance: &summary,
        tuned: grid_spec.is_some(),
        empty_trace,
        runs: runs.iter().map(|r| r.summary()).collect(),
        diverged_solvers: &diverged,
        grid: &grid,
    };
    write_json(&dir.join("metadata.json"), &meta)?;

    let report = ExperimentReport {
        dir: dir.to_path_buf(),
        instance: summary,
        runs,
        grid,
        diverged_solvers: diverged,
    };
    if report.divergence_only() {
        return Err(HarnessError::AllDiverged {
            solver: cfg.solvers.iter().map(|s| s.solver.name()).collect::<Vec<_>>().join(", "),
        });
    }
    Ok(report)
}
